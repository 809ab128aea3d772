//! Text output: time series and snapshot CSV files, the quasi-static
//! trajectory, and JSON reports. Numbers are written with 15 significant
//! digits so identical runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::mobility::{self, ModelParams};
use crate::quasistatic::QsState;

pub const TIMESERIES_COLUMNS: [&str; 14] = [
    "t",
    "mass",
    "energy",
    "dissipation_h",
    "cum_dissipation",
    "entropy_integral",
    "bulk_dissipation",
    "cum_bulk",
    "support_measure",
    "sup_slope_sq",
    "lipschitz_rhs",
    "weak_R_l1",
    "dt",
    "newton_iters",
];

/// `{:.14e}`: 15 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.14e}")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {msg}"),
    }
}

pub fn timeseries_to_string(records: &[DiagnosticsRecord]) -> String {
    let mut out = TIMESERIES_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let nums = [
            r.t,
            r.mass,
            r.energy,
            r.dissipation_h,
            r.cum_dissipation,
            r.entropy_integral,
            r.bulk_dissipation,
            r.cum_bulk,
            r.support_measure,
            r.sup_slope_sq,
            r.lipschitz_rhs,
            r.weak_r_l1,
            r.dt,
        ];
        for x in nums {
            out.push_str(&fmt_num(x));
            out.push(',');
        }
        let _ = writeln!(out, "{}", r.newton_iters);
    }
    out
}

pub fn write_timeseries(records: &[DiagnosticsRecord], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &timeseries_to_string(records))
}

/// A CSV table with a header row of column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Reads a numeric CSV whose first non-comment line names the columns.
pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match &columns {
            None => columns = Some(line.split(',').map(|c| c.trim().to_string()).collect()),
            Some(cols) => {
                let row = line
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| parse_err(path, i + 1, e))?;
                if row.len() != cols.len() {
                    return Err(parse_err(
                        path,
                        i + 1,
                        format!("{} fields, expected {}", row.len(), cols.len()),
                    ));
                }
                rows.push(row);
            }
        }
    }
    let columns = columns.ok_or_else(|| parse_err(path, 1, "missing header"))?;
    Ok(Table { columns, rows })
}

pub fn read_timeseries(path: impl AsRef<Path>) -> Result<Vec<DiagnosticsRecord>> {
    let path = path.as_ref();
    let table = read_table(path)?;
    if table.columns != TIMESERIES_COLUMNS {
        return Err(parse_err(path, 1, "unexpected time series columns"));
    }
    Ok(table
        .rows
        .iter()
        .map(|r| DiagnosticsRecord {
            t: r[0],
            mass: r[1],
            energy: r[2],
            dissipation_h: r[3],
            cum_dissipation: r[4],
            entropy_integral: r[5],
            bulk_dissipation: r[6],
            cum_bulk: r[7],
            support_measure: r[8],
            sup_slope_sq: r[9],
            lipschitz_rhs: r[10],
            weak_r_l1: r[11],
            dt: r[12],
            newton_iters: r[13] as u64,
            ..Default::default()
        })
        .collect())
}

pub fn snapshot_to_string(u: &Field, t: f64, p: &ModelParams) -> Result<String> {
    let rho = mobility::rho_field(&u.map(|v| v.max(0.0)), p)?;
    let g = u.grid();
    let mut out = format!(
        "# t={} epsilon={} n={}\n",
        fmt_num(t),
        fmt_num(p.epsilon()),
        fmt_num(p.n())
    );
    for (i, (v, r)) in u.values().iter().zip(rho.values()).enumerate() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_num(g.center(i)),
            fmt_num(*v),
            fmt_num(*r)
        );
    }
    Ok(out)
}

pub fn write_snapshot(u: &Field, t: f64, p: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &snapshot_to_string(u, t, p)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub epsilon: f64,
    pub n: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub rho: Vec<f64>,
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Snapshot> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| parse_err(path, 1, "missing `# t=...` header"))?;
    let get = |key: &str| -> Result<f64> {
        header
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
            .ok_or_else(|| parse_err(path, 1, format!("missing {key}")))?
            .parse()
            .map_err(|e| parse_err(path, 1, e))
    };
    let (t, epsilon, n) = (get("t")?, get("epsilon")?, get("n")?);
    let mut snap = Snapshot {
        t,
        epsilon,
        n,
        x: vec![],
        u: vec![],
        rho: vec![],
    };
    for (i, line) in lines.enumerate() {
        let vals = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(path, i + 2, e))?;
        if vals.len() != 3 {
            return Err(parse_err(path, i + 2, "expected x,u,rho"));
        }
        snap.x.push(vals[0]);
        snap.u.push(vals[1]);
        snap.rho.push(vals[2]);
    }
    Ok(snap)
}

/// Header `# intervals=K gamma_law=constant` (largest interval count over
/// the run; mass fractions are held fixed between merges), then
/// `t,a_1,b_1,gamma_1,...,total_support`; rows with fewer intervals leave
/// the trailing interval fields empty.
pub fn qs_trajectory_to_string(states: &[QsState]) -> String {
    let k = states.iter().map(|s| s.droplets.len()).max().unwrap_or(0);
    let mut out = format!("# intervals={k} gamma_law=constant\nt");
    for i in 1..=k {
        let _ = write!(out, ",a_{i},b_{i},gamma_{i}");
    }
    out.push_str(",total_support\n");
    for s in states {
        out.push_str(&fmt_num(s.t));
        let d = &s.droplets;
        for i in 0..k {
            match d.intervals().get(i) {
                Some(&(a, b)) => {
                    let _ = write!(
                        out,
                        ",{},{},{}",
                        fmt_num(a),
                        fmt_num(b),
                        fmt_num(d.gammas()[i])
                    );
                }
                None => out.push_str(",,,"),
            }
        }
        let _ = writeln!(out, ",{}", fmt_num(d.support_length()));
    }
    out
}

pub fn write_qs_trajectory(states: &[QsState], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &qs_trajectory_to_string(states))
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    write_file(path.as_ref(), &(text + "\n"))
}

pub fn write_text(text: &str, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), text)
}
