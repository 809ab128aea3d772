//! Studies built on the solver: power-law fits of the apparent support,
//! ε-sweeps against the closed-form support bounds, and the comparison
//! of a PDE run with the quasi-static model.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::grid::{make_uniform_grid, Field, Grid};
use crate::mobility::ModelParams;
use crate::quasistatic::{self, DropletSet, QsConfig};
use crate::solver::{self, InitialConditionSpec, InitialKind, SolverConfig, Trajectory, Wall};

pub const MIN_FIT_SAMPLES: usize = 8;

/// Fraction of the simulated time, counted from the end, used for fits.
pub const DEFAULT_FIT_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub rms_residual: f64,
    pub samples: usize,
}

/// Least squares of `ln size` against `ln t` over the samples with
/// `t_lo <= t <= t_hi`.
pub fn power_law_fit(times: &[f64], sizes: &[f64], window: (f64, f64)) -> Result<PowerLawFit> {
    if times.len() != sizes.len() {
        return Err(Error::invalid("times and sizes differ in length"));
    }
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::invalid(format!("empty fit window ({lo}, {hi})")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &s) in times.iter().zip(sizes) {
        if t < lo || t > hi {
            continue;
        }
        if !(t > 0.0) || !(s > 0.0) {
            return Err(Error::invalid(format!(
                "fit needs positive samples, got t={t}, size={s}"
            )));
        }
        xs.push(t.ln());
        ys.push(s.ln());
    }
    let k = xs.len();
    if k < MIN_FIT_SAMPLES {
        return Err(Error::invalid(format!(
            "{k} samples in the fit window, need at least {MIN_FIT_SAMPLES}"
        )));
    }
    let kf = k as f64;
    let mx = xs.iter().sum::<f64>() / kf;
    let my = ys.iter().sum::<f64>() / kf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("fit window holds a single time"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        rms_residual: (ss / kf).sqrt(),
        samples: k,
    })
}

/// Grid description stored with reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_left: f64,
    pub x_right: f64,
    pub n_cells: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<Grid>> {
        make_uniform_grid(self.x_left, self.x_right, self.n_cells)
    }

    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }
}

/// Everything except ε that a sweep entry needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub initial: InitialConditionSpec,
}

impl RunSpec {
    fn with_epsilon(&self, eps: f64) -> Result<SolverConfig> {
        let mut cfg = self.solver;
        cfg.params = ModelParams::new(eps, self.solver.params.n())?;
        Ok(cfg)
    }

    pub fn run(&self) -> Result<(Field, Trajectory)> {
        let grid = self.grid.build()?;
        let u0 = solver::initial_condition(&self.initial, &grid)?;
        let traj = solver::solve(&u0, &self.solver)?;
        Ok((u0, traj))
    }
}

/// Per-run summary of the diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub max_relative_mass_drift: f64,
    /// Largest `E(t_{k+1}) - E(t_k)` over consecutive snapshots.
    pub max_energy_increase: f64,
    pub remainder_bound_always: bool,
    pub max_lipschitz_ratio: f64,
    pub min_value: f64,
    pub steps: u64,
    pub newton_iterations: u64,
}

impl DiagnosticsSummary {
    pub fn of(traj: &Trajectory) -> Self {
        let m0 = traj.snapshots[0].record.mass;
        let mut s = Self {
            max_relative_mass_drift: 0.0,
            max_energy_increase: f64::NEG_INFINITY,
            remainder_bound_always: true,
            max_lipschitz_ratio: 0.0,
            min_value: f64::INFINITY,
            steps: traj.step_count,
            newton_iterations: traj.newton_iter_total,
        };
        let records: Vec<&DiagnosticsRecord> = traj.records().collect();
        for (k, r) in records.iter().enumerate() {
            s.max_relative_mass_drift = s.max_relative_mass_drift.max((r.mass - m0).abs() / m0);
            s.remainder_bound_always &= r.remainder_bound_holds();
            let ratio = r.lipschitz_ratio();
            if ratio.is_finite() {
                s.max_lipschitz_ratio = s.max_lipschitz_ratio.max(ratio);
            }
            if k > 0 {
                s.max_energy_increase = s.max_energy_increase.max(r.energy - records[k - 1].energy);
            }
        }
        for snap in &traj.snapshots {
            s.min_value = s.min_value.min(snap.u.min());
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub config: SolverConfig,
    pub times: Vec<f64>,
    /// `|{u > ε}|` at each recorded time.
    pub support: Vec<f64>,
    pub general_bound: Vec<f64>,
    /// `min_t (support - general bound)`.
    pub min_margin: f64,
    pub fit: Option<PowerLawFit>,
    pub fit_error: Option<String>,
    pub summary: Option<DiagnosticsSummary>,
    pub abort: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub grid: GridSpec,
    pub n: f64,
    pub initial: InitialConditionSpec,
    /// Initial support length used in the bounds.
    pub s0: f64,
    pub fit_window: (f64, f64),
    pub entries: Vec<SweepEntry>,
}

/// One solve per ε (run in parallel), with the apparent support fitted to
/// a power law over `fit_window` (default: the last 70% of `t_end`).
pub fn epsilon_sweep(
    base: &RunSpec,
    eps_list: &[f64],
    fit_window: Option<(f64, f64)>,
) -> Result<SweepReport> {
    if eps_list.is_empty() {
        return Err(Error::invalid("empty epsilon list"));
    }
    for w in eps_list.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::invalid("epsilon list must be decreasing"));
        }
    }
    let configs = eps_list
        .iter()
        .map(|&e| base.with_epsilon(e))
        .collect::<Result<Vec<_>>>()?;
    let grid = base.grid.build()?;
    let u0 = solver::initial_condition(&base.initial, &grid)?;
    let s0 = base.initial.support_length(&grid);
    let t_end = base.solver.t_end;
    let window = fit_window.unwrap_or(((1.0 - DEFAULT_FIT_FRACTION) * t_end, t_end));
    if !(window.0 >= 0.0 && window.0 < window.1 && window.1 <= t_end) {
        return Err(Error::invalid("fit window must lie inside [0, t_end]"));
    }
    let omega = base.grid.length();

    let entries = configs
        .par_iter()
        .map(|cfg| sweep_entry(&u0, cfg, s0, omega, window))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        grid: base.grid,
        n: base.solver.params.n(),
        initial: base.initial.clone(),
        s0,
        fit_window: window,
        entries,
    })
}

fn sweep_entry(
    u0: &Field,
    cfg: &SolverConfig,
    s0: f64,
    omega: f64,
    window: (f64, f64),
) -> Result<SweepEntry> {
    let eps = cfg.params.epsilon();
    let traj = match solver::solve(u0, cfg) {
        Ok(t) => t,
        Err(e) => {
            return Ok(SweepEntry {
                epsilon: eps,
                config: *cfg,
                times: vec![],
                support: vec![],
                general_bound: vec![],
                min_margin: f64::NAN,
                fit: None,
                fit_error: None,
                summary: None,
                abort: Some(e.to_string()),
            })
        }
    };
    let mut times = Vec::with_capacity(traj.snapshots.len());
    let mut support = Vec::with_capacity(traj.snapshots.len());
    let mut general_bound = Vec::with_capacity(traj.snapshots.len());
    let mut min_margin = f64::INFINITY;
    for snap in &traj.snapshots {
        let s = diagnostics::apparent_support(&snap.u, eps)?;
        let (general, _) = quasistatic::support_bounds(snap.t, s0, omega)?;
        times.push(snap.t);
        support.push(s);
        general_bound.push(general);
        min_margin = min_margin.min(s - general);
    }
    let (fit, fit_error) = match power_law_fit(&times, &support, window) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(SweepEntry {
        epsilon: eps,
        config: *cfg,
        times,
        support,
        general_bound,
        min_margin,
        fit,
        fit_error,
        summary: Some(DiagnosticsSummary::of(&traj)),
        abort: traj.abort.as_ref().map(|a| a.message.clone()),
    })
}

/// First and last crossing of `threshold` by the piecewise-linear
/// interpolant through the cell centers.
pub fn apparent_interval(u: &Field, threshold: f64) -> Option<(f64, f64)> {
    let g = u.grid();
    let v = u.values();
    let first = v.iter().position(|&x| x > threshold)?;
    let last = v.iter().rposition(|&x| x > threshold)?;
    let cross = |i: usize, j: usize| {
        let (xi, xj) = (g.center(i), g.center(j));
        xi + (xj - xi) * (threshold - v[i]) / (v[j] - v[i])
    };
    let a = if first == 0 {
        g.x_left()
    } else {
        cross(first - 1, first)
    };
    let b = if last + 1 == v.len() {
        g.x_right()
    } else {
        cross(last, last + 1)
    };
    Some((a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub epsilon: f64,
    pub times: Vec<f64>,
    /// `sup |u - w| / max u`, `w` the parabola with the PDE mass on the
    /// apparent support.
    pub profile_distance: Vec<f64>,
    pub pde_support: Vec<f64>,
    pub qs_support: Vec<f64>,
    /// `pde_support - qs_support`.
    pub support_difference: Vec<f64>,
    pub abort: Option<String>,
}

/// Droplet set matching a single-droplet initial condition.
pub fn droplets_for(initial: &InitialConditionSpec, grid: &Grid) -> Result<DropletSet> {
    let domain = (grid.x_left(), grid.x_right());
    match &initial.kind {
        InitialKind::Parabola { a, b, mass } => DropletSet::single(*a, *b, *mass, domain),
        InitialKind::HalfParabola { b, mass, wall } => match wall {
            Wall::Left => DropletSet::single(domain.0, *b, *mass, domain),
            Wall::Right => DropletSet::single(*b, domain.1, *mass, domain),
        },
        _ => Err(Error::invalid(
            "the quasi-static comparison needs a single droplet",
        )),
    }
}

pub fn compare_pde_qs(base: &RunSpec, qs_cfg: &QsConfig) -> Result<CompareReport> {
    let grid = base.grid.build()?;
    let d0 = droplets_for(&base.initial, &grid)?;
    let (_, traj) = base.run()?;
    let qs = quasistatic::qs_solve(&d0, qs_cfg)?;
    let eps = base.solver.params.epsilon();
    let mut out = CompareReport {
        epsilon: eps,
        times: vec![],
        profile_distance: vec![],
        pde_support: vec![],
        qs_support: vec![],
        support_difference: vec![],
        abort: traj.abort.as_ref().map(|a| a.message.clone()),
    };
    let slack = 1e-12 * qs_cfg.t_end.max(1.0);
    for snap in &traj.snapshots {
        if snap.t > qs_cfg.t_end + slack {
            break;
        }
        let Some(state) = qs.iter().rev().find(|s| s.t <= snap.t + slack) else {
            continue;
        };
        let mass = diagnostics::mass(&snap.u);
        let peak = snap.u.max();
        let distance = match apparent_interval(&snap.u, eps) {
            Some((a, b)) if peak > 0.0 => {
                let w = DropletSet::single(a, b, mass, d0.domain()).map(|d| {
                    snap.u
                        .grid()
                        .sample(|x| quasistatic::parabola_profile(&d, x))
                })?;
                let sup = snap
                    .u
                    .values()
                    .iter()
                    .zip(w.values())
                    .fold(0.0_f64, |m, (u, w)| m.max((u - w).abs()));
                sup / peak
            }
            _ => f64::NAN,
        };
        let pde = diagnostics::apparent_support(&snap.u, eps)?;
        let q = state.droplets.support_length();
        out.times.push(snap.t);
        out.profile_distance.push(distance);
        out.pde_support.push(pde);
        out.qs_support.push(q);
        out.support_difference.push(pde - q);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
        (0..k)
            .map(|i| a + (b - a) * i as f64 / (k - 1) as f64)
            .collect()
    }

    #[test]
    fn fit_recovers_exponents() {
        let t = linspace(10.0, 100.0, 50);
        let s: Vec<f64> = t
            .iter()
            .map(|t| (1008.0 * t + 1.0).powf(1.0 / 7.0))
            .collect();
        let f = power_law_fit(&t, &s, (10.0, 100.0)).unwrap();
        assert!((f.exponent - 1.0 / 7.0).abs() < 0.005);

        let lin: Vec<f64> = t.iter().map(|t| 3.0 * t).collect();
        let f = power_law_fit(&t, &lin, (0.0, 1e3)).unwrap();
        assert!((f.exponent - 1.0).abs() < 1e-10);
        assert!((f.prefactor - 3.0).abs() < 1e-9);

        let flat = vec![2.5; t.len()];
        let f = power_law_fit(&t, &flat, (0.0, 1e3)).unwrap();
        assert!(f.exponent.abs() < 1e-10);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let t = linspace(1.0, 2.0, 20);
        let mut s = vec![1.0; 20];
        assert!(power_law_fit(&t, &s, (1.0, 1.2)).is_err());
        s[5] = 0.0;
        assert!(power_law_fit(&t, &s, (1.0, 2.0)).is_err());
        assert!(power_law_fit(&t, &s[..3], (1.0, 2.0)).is_err());
    }

    #[test]
    fn apparent_interval_of_parabola() {
        let g = make_uniform_grid(0.0, 1.0, 400).unwrap();
        let u = g.sample(|x| (6.0 * (0.75 - x) * (x - 0.25)).max(0.0));
        let (a, b) = apparent_interval(&u, 1e-9).unwrap();
        assert!((a - 0.25).abs() < 2.0 * g.h() && (b - 0.75).abs() < 2.0 * g.h());
        assert!(apparent_interval(&g.zeros(), 0.1).is_none());
    }

    fn small_run(t_end: f64) -> RunSpec {
        let mut solver = SolverConfig::new(ModelParams::new(1e-2, 2.0).unwrap(), t_end);
        solver.undershoot_tol = 1e-3;
        solver.record_every = t_end / 20.0;
        solver.dt_max = t_end / 20.0;
        RunSpec {
            grid: GridSpec {
                x_left: 0.0,
                x_right: 1.0,
                n_cells: 128,
            },
            solver,
            initial: InitialConditionSpec::parabola(0.3, 0.7, 1.0),
        }
    }

    #[test]
    fn single_epsilon_sweep() {
        let report = epsilon_sweep(&small_run(1e-5), &[1e-2], None).unwrap();
        assert_eq!(report.entries.len(), 1);
        let e = &report.entries[0];
        assert!(e.fit.unwrap().exponent.is_finite());
        assert_eq!(e.times.len(), 21);
        assert!(e.summary.unwrap().remainder_bound_always);
        assert!((report.fit_window.0 - 3e-6).abs() < 1e-18);
        assert!(epsilon_sweep(&small_run(1e-5), &[1e-3, 1e-2], None).is_err());
    }

    #[test]
    fn comparison_starts_at_zero_distance() {
        let run = small_run(1e-5);
        let qs = QsConfig::new(1e-5, 5e-7);
        let rep = compare_pde_qs(&run, &qs).unwrap();
        assert_eq!(rep.times[0], 0.0);
        // contact points located to O(h) by interpolation; h = 1/128 here
        assert!(
            rep.profile_distance[0] < 0.05,
            "{}",
            rep.profile_distance[0]
        );
        assert_eq!(rep.times.len(), 21);
        assert!(rep.support_difference.iter().all(|d| d.is_finite()));
    }
}
