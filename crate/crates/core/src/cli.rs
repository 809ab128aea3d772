//! Command-line entry point.
//!
//! Every subcommand takes `--config PATH`; outputs go to
//! `outputs.directory`, together with the resolved configuration
//! (`config.toml`, all defaults filled in).
//!
//! Exit status: 0 success, 1 other failure, 2 configuration or parse error,
//! 3 solver abort, 4 verification failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{parse_config, RunConfig};
use crate::diagnostics;
use crate::error::Error;
use crate::experiments::{self, DiagnosticsSummary, PowerLawFit};
use crate::grid::Field;
use crate::io;
use crate::quasistatic;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ABORT: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const CONFIG_ECHO: &str = "config.toml";

/// Relative mass drift accepted by `verify`.
pub const VERIFY_MASS_TOL: f64 = 1e-10;
/// Energy increase between snapshots accepted by `verify`, relative to E(0).
pub const VERIFY_ENERGY_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(
    name = "thinfilm",
    version,
    about = "Thin film equation with small slippage"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the PDE; write the time series and snapshots.
    Simulate(ConfigArg),
    /// Integrate the quasi-static droplet model.
    Quasistatic(ConfigArg),
    /// Run the ε sweep of `[sweep]` and write `sweep.json`.
    Sweep(ConfigArg),
    /// Fit `size ~ C t^α` to a CSV column over `[t_lo, t_hi]`.
    Fit(FitArgs),
    /// Compare the PDE against the quasi-static model.
    Compare(ConfigArg),
    /// Recheck stored `simulate` output against the conservation and
    /// positivity invariants.
    Verify(ConfigArg),
}

#[derive(Debug, clap::Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, clap::Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "t-lo")]
    t_lo: f64,
    #[arg(long = "t-hi")]
    t_hi: f64,
    /// Size column; defaults to `total_support`, then `support_measure`,
    /// then the only column besides `t`.
    #[arg(long)]
    column: Option<String>,
    /// When given, the fit is also written to `<outputs.directory>/fit.json`.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("solver aborted: {0}")]
    Aborted(String),
    #[error("verification failed:\n  {}", .0.join("\n  "))]
    Verify(Vec<String>),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::Config(_) | Error::Parse { .. }) => EXIT_CONFIG,
            CliError::Core(Error::StepUnderflow { .. }) | CliError::Aborted(_) => EXIT_ABORT,
            CliError::Verify(_) => EXIT_VERIFY,
            CliError::Core(_) => EXIT_FAILURE,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Runs the command line `argv` (program name first) and returns the exit
/// status.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a.config),
        Command::Quasistatic(a) => quasistatic_cmd(&a.config),
        Command::Sweep(a) => sweep(&a.config),
        Command::Fit(a) => fit(&a),
        Command::Compare(a) => compare(&a.config),
        Command::Verify(a) => verify(&a.config),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(path: &Path) -> CliResult<RunConfig> {
    let cfg = parse_config(path)?;
    let dir = &cfg.outputs.directory;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::write_text(&cfg.to_toml()?, dir.join(CONFIG_ECHO))?;
    Ok(cfg)
}

fn snapshot_name(k: usize) -> String {
    format!("snapshot_{k:05}.csv")
}

fn simulate(path: &Path) -> CliResult<()> {
    let cfg = load(path)?;
    let dir = &cfg.outputs.directory;
    let (_, traj) = cfg.run_spec().run()?;
    let records: Vec<_> = traj.records().copied().collect();
    io::write_timeseries(&records, dir.join(TIMESERIES_FILE))?;
    if cfg.outputs.emit_snapshots {
        let snap_dir = dir.join(SNAPSHOT_DIR);
        if snap_dir.exists() {
            fs::remove_dir_all(&snap_dir).map_err(|e| Error::io(&snap_dir, e))?;
        }
        for (k, s) in traj.snapshots.iter().enumerate() {
            io::write_snapshot(&s.u, s.t, &cfg.model, snap_dir.join(snapshot_name(k)))?;
        }
    }
    let summary = DiagnosticsSummary::of(&traj);
    io::write_json(&summary, dir.join("summary.json"))?;
    let last = traj.last();
    println!(
        "t = {:e}  steps = {}  newton = {}  mass drift = {:e}  E = {:e}",
        last.t,
        traj.step_count,
        traj.newton_iter_total,
        summary.max_relative_mass_drift,
        last.record.energy
    );
    match &traj.abort {
        Some(a) => Err(CliError::Aborted(a.message.clone())),
        None => Ok(()),
    }
}

fn quasistatic_cmd(path: &Path) -> CliResult<()> {
    let cfg = load(path)?;
    let d0 = cfg.droplets()?;
    let states = quasistatic::qs_solve(&d0, &cfg.qs_config()?)?;
    io::write_qs_trajectory(&states, cfg.outputs.directory.join("quasistatic.csv"))?;
    if let Some(last) = states.last() {
        println!(
            "t = {:e}  droplets = {}  support = {:.10}",
            last.t,
            last.droplets.len(),
            last.droplets.support_length()
        );
    }
    Ok(())
}

fn sweep(path: &Path) -> CliResult<()> {
    let cfg = load(path)?;
    let s = cfg.sweep_section()?;
    let report = experiments::epsilon_sweep(&cfg.run_spec(), &s.epsilons, s.fit_window)?;
    io::write_json(&report, cfg.outputs.directory.join("sweep.json"))?;
    for e in &report.entries {
        match &e.fit {
            Some(f) => println!("epsilon = {:e}  exponent = {:.6}", e.epsilon, f.exponent),
            None => println!(
                "epsilon = {:e}  no fit ({})",
                e.epsilon,
                e.fit_error.as_deref().or(e.abort.as_deref()).unwrap_or("-")
            ),
        }
    }
    let aborted: Vec<String> = report
        .entries
        .iter()
        .filter_map(|e| {
            e.abort
                .as_ref()
                .map(|m| format!("epsilon = {:e}: {m}", e.epsilon))
        })
        .collect();
    if aborted.is_empty() {
        Ok(())
    } else {
        Err(CliError::Aborted(aborted.join("; ")))
    }
}

fn size_column(table: &io::Table, requested: Option<&str>) -> Option<String> {
    if let Some(c) = requested {
        return table.columns.iter().any(|k| k == c).then(|| c.to_string());
    }
    for c in ["total_support", "support_measure"] {
        if table.columns.iter().any(|k| k == c) {
            return Some(c.to_string());
        }
    }
    match table.columns.as_slice() {
        [t, other] if t == "t" => Some(other.clone()),
        _ => None,
    }
}

#[derive(Serialize)]
struct FitOutput<'a> {
    input: &'a Path,
    column: &'a str,
    window: (f64, f64),
    fit: PowerLawFit,
}

fn fit(a: &FitArgs) -> CliResult<()> {
    let cfg = a.config.as_deref().map(load).transpose()?;
    let table = io::read_table(&a.input)?;
    let parse_err = |message: String| Error::Parse {
        path: a.input.clone(),
        message,
    };
    let times = table
        .column("t")
        .ok_or_else(|| parse_err("no `t` column".into()))?;
    let column = size_column(&table, a.column.as_deref())
        .ok_or_else(|| parse_err("cannot determine the size column; pass --column".into()))?;
    let sizes = table.column(&column).expect("column exists");
    let f = experiments::power_law_fit(&times, &sizes, (a.t_lo, a.t_hi))?;
    println!("column = {column}");
    println!("exponent = {:.10}", f.exponent);
    println!("prefactor = {:.10e}", f.prefactor);
    println!("rms_residual = {:.3e}", f.rms_residual);
    println!("samples = {}", f.samples);
    if let Some(cfg) = cfg {
        let out = FitOutput {
            input: &a.input,
            column: &column,
            window: (a.t_lo, a.t_hi),
            fit: f,
        };
        io::write_json(&out, cfg.outputs.directory.join("fit.json"))?;
    }
    Ok(())
}

fn compare(path: &Path) -> CliResult<()> {
    let cfg = load(path)?;
    let report = experiments::compare_pde_qs(&cfg.run_spec(), &cfg.qs_config()?)?;
    io::write_json(&report, cfg.outputs.directory.join("compare.json"))?;
    let worst = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    println!(
        "max profile distance = {:.4e}  max support difference = {:.4e}",
        worst(&report.profile_distance),
        worst(&report.support_difference)
    );
    match report.abort {
        Some(m) => Err(CliError::Aborted(m)),
        None => Ok(()),
    }
}

/// Rechecks `simulate` output: each snapshot's mass, energy and remainder
/// bound are recomputed from the stored profile, compared with the time
/// series, and checked for conservation, energy decay and positivity.
fn verify(path: &Path) -> CliResult<()> {
    let cfg = parse_config(path)?;
    let dir = &cfg.outputs.directory;
    let grid = cfg.grid.build()?;
    let p = cfg.model;
    let series = io::read_timeseries(dir.join(TIMESERIES_FILE))?;
    let mut failures = Vec::new();

    let snap_dir = dir.join(SNAPSHOT_DIR);
    let mut files: Vec<PathBuf> = fs::read_dir(&snap_dir)
        .map_err(|e| Error::io(&snap_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Verify(vec![format!(
            "no snapshots in {}",
            snap_dir.display()
        )]));
    }
    if files.len() != series.len() {
        failures.push(format!(
            "{} snapshots but {} time series rows",
            files.len(),
            series.len()
        ));
    }

    let mut first: Option<(f64, f64, f64)> = None;
    let mut prev_energy = f64::INFINITY;
    for (k, file) in files.iter().enumerate() {
        let snap = io::read_snapshot(file)?;
        let name = file.display();
        if snap.epsilon != p.epsilon() || snap.n != p.n() {
            failures.push(format!("{name}: model parameters differ from the config"));
        }
        let u = Field::new(grid.clone(), snap.u.clone())
            .map_err(|_| Error::invalid(format!("{name}: cell count differs from the config")))?;
        let mass = diagnostics::mass(&u);
        let nonneg = u.map(|v| v.max(0.0));
        let energy = diagnostics::energy(&nonneg);
        let (m0, e0, umax0) = *first.get_or_insert((mass, energy, u.max()));

        let drift = (mass - m0).abs() / m0.abs().max(f64::MIN_POSITIVE);
        if drift > VERIFY_MASS_TOL {
            failures.push(format!("{name}: relative mass drift {drift:e}"));
        }
        if energy > prev_energy + VERIFY_ENERGY_TOL * e0 {
            failures.push(format!("{name}: energy increased to {energy:e}"));
        }
        prev_energy = energy;
        let floor = -cfg.solver.undershoot_tol * umax0;
        if u.min() < floor {
            failures.push(format!("{name}: minimum {:e} below {floor:e}", u.min()));
        }
        match diagnostics::weak_r_l1(&nonneg, &p) {
            Ok(r) if !r.holds => failures.push(format!(
                "{name}: remainder bound fails ({:e} > {:e})",
                r.lhs, r.rhs
            )),
            Ok(_) => {}
            Err(e) => failures.push(format!("{name}: {e}")),
        }
        if let Some(row) = series.get(k) {
            let scale = m0.abs().max(f64::MIN_POSITIVE);
            if (row.t - snap.t).abs() > 1e-12 * row.t.abs().max(1e-300)
                || (row.mass - mass).abs() > VERIFY_MASS_TOL * scale
            {
                failures.push(format!("{name}: does not match time series row {}", k + 1));
            }
        }
    }
    if failures.is_empty() {
        println!("verified {} snapshots", files.len());
        Ok(())
    } else {
        Err(CliError::Verify(failures))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_map_to_config_status() {
        assert_eq!(run_cli(["thinfilm", "bogus"]), EXIT_CONFIG);
        assert_eq!(run_cli(["thinfilm", "simulate"]), EXIT_CONFIG);
        assert_eq!(run_cli(["thinfilm", "--help"]), EXIT_OK);
    }

    #[test]
    fn missing_config_file_is_an_io_failure() {
        let code = run_cli(["thinfilm", "simulate", "--config", "/nonexistent/c.toml"]);
        assert_eq!(code, EXIT_FAILURE);
    }

    #[test]
    fn size_column_fallbacks() {
        let t = |cols: &[&str]| io::Table {
            columns: cols.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
        };
        assert_eq!(size_column(&t(&["t", "s"]), None).as_deref(), Some("s"));
        assert_eq!(
            size_column(&t(&["t", "a_1", "total_support"]), None).as_deref(),
            Some("total_support")
        );
        assert_eq!(size_column(&t(&["t", "a", "b"]), None), None);
        assert_eq!(
            size_column(&t(&["t", "a", "b"]), Some("b")).as_deref(),
            Some("b")
        );
        assert_eq!(size_column(&t(&["t", "a"]), Some("z")), None);
    }
}
