//! Conservative backward-Euler integrator for the slip thin film equation.
//!
//! One step solves, by damped Newton iteration,
//!
//! ```text
//! F_i(v) = v_i - u_i + (dt |ln ε| / h) (q_{i+½}(v) - q_{i-½}(v)) = 0,
//! q_{i+½}(v) = M_δ((v_i + v_{i+1}) / 2) (v_{i+2} - 3 v_{i+1} + 3 v_i - v_{i-1}) / h³,
//! ```
//!
//! with `q = 0` on the two boundary faces and mirror ghosts in the third
//! difference. `M_δ(u) = ε^(3-n)|u|ⁿ + |u|³ + δ`. The Jacobian is
//! pentadiagonal and every Newton update preserves `Σ v_i` exactly (its
//! column sums are one), so mass is conserved up to the linear solve.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::grid::{fold_ghost, Field, Grid};
use crate::linalg::BandMatrix;
use crate::mobility::{self, ModelParams, RegularizationParams};

/// Default scale of the positivity regularization, `δ = scale · max(u_in)³`.
pub const DEFAULT_DELTA_SCALE: f64 = 1e-12;

/// A step converging within this many Newton iterations grows `dt`.
const FAST_NEWTON: u32 = 4;
const DT_GROWTH: f64 = 1.2;
const MAX_LINE_SEARCH_HALVINGS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub params: ModelParams,
    /// `None` picks `δ = 1e-12 · max(u_in)³` when the solve starts.
    pub reg: Option<RegularizationParams>,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub newton_tol: f64,
    pub newton_max_iter: u32,
    pub t_end: f64,
    pub record_every: f64,
    pub undershoot_tol: f64,
}

impl SolverConfig {
    pub fn new(params: ModelParams, t_end: f64) -> Self {
        Self {
            params,
            reg: None,
            dt_init: 1e-12,
            dt_min: 1e-14,
            dt_max: 1e-4,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            t_end,
            record_every: if t_end > 0.0 { t_end / 100.0 } else { 1.0 },
            undershoot_tol: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_min <= self.dt_init
            && self.dt_init <= self.dt_max
            && self.dt_max.is_finite();
        if !ok {
            return Err(Error::invalid(
                "solver requires 0 < dt_min <= dt_init <= dt_max",
            ));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::invalid("newton_tol must be > 0"));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::invalid("newton_max_iter must be >= 1"));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::invalid("t_end must be finite and >= 0"));
        }
        if !(self.record_every > 0.0) {
            return Err(Error::invalid("record_every must be > 0"));
        }
        if !(self.undershoot_tol >= 0.0) {
            return Err(Error::invalid("undershoot_tol must be >= 0"));
        }
        if let Some(r) = self.reg {
            if !(r.delta > 0.0) {
                return Err(Error::invalid("the solver needs delta > 0"));
            }
        }
        Ok(())
    }

    /// The regularization actually used for initial data with maximum `u_max`.
    pub fn regularization_for(&self, u_max: f64) -> RegularizationParams {
        self.reg.unwrap_or(RegularizationParams {
            delta: (DEFAULT_DELTA_SCALE * u_max.max(0.0).powi(3)).max(f64::MIN_POSITIVE),
        })
    }
}

/// Side of the wall a half-droplet leans against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialKind {
    /// `6 m (b - x)₊ (x - a)₊ / (b - a)³`.
    Parabola { a: f64, b: f64, mass: f64 },
    /// Half of a parabola whose crest sits on the wall; `b` is the free
    /// contact point.
    HalfParabola { b: f64, mass: f64, wall: Wall },
    TwoParabolas {
        a1: f64,
        b1: f64,
        m1: f64,
        a2: f64,
        b2: f64,
        m2: f64,
    },
    /// Explicit cell values.
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConditionSpec {
    #[serde(flatten)]
    pub kind: InitialKind,
    #[serde(default)]
    pub precursor_floor: f64,
}

impl InitialConditionSpec {
    pub fn parabola(a: f64, b: f64, mass: f64) -> Self {
        Self {
            kind: InitialKind::Parabola { a, b, mass },
            precursor_floor: 0.0,
        }
    }

    /// Total droplet mass, excluding the precursor.
    pub fn droplet_mass(&self, grid: &Grid) -> f64 {
        match &self.kind {
            InitialKind::Parabola { mass, .. } | InitialKind::HalfParabola { mass, .. } => *mass,
            InitialKind::TwoParabolas { m1, m2, .. } => m1 + m2,
            InitialKind::Table { values } => grid.h() * values.iter().sum::<f64>(),
        }
    }

    /// Length of `{u_in > 0}` for the analytic kinds.
    pub fn support_length(&self, grid: &Grid) -> f64 {
        match &self.kind {
            InitialKind::Parabola { a, b, .. } => b - a,
            InitialKind::HalfParabola { b, wall, .. } => match wall {
                Wall::Left => b - grid.x_left(),
                Wall::Right => grid.x_right() - b,
            },
            InitialKind::TwoParabolas { a1, b1, a2, b2, .. } => (b1 - a1) + (b2 - a2),
            InitialKind::Table { values } => {
                grid.h() * values.iter().filter(|&&v| v > 0.0).count() as f64
            }
        }
    }
}

fn parabola_at(x: f64, a: f64, b: f64, mass: f64) -> f64 {
    6.0 * mass * (b - x).max(0.0) * (x - a).max(0.0) / (b - a).powi(3)
}

fn check_interval(a: f64, b: f64, mass: f64, g: &Grid) -> Result<()> {
    if !(a < b) {
        return Err(Error::invalid(format!(
            "droplet interval ({a}, {b}) is empty"
        )));
    }
    if a < g.x_left() || b > g.x_right() {
        return Err(Error::invalid(format!(
            "droplet interval ({a}, {b}) leaves the domain ({}, {})",
            g.x_left(),
            g.x_right()
        )));
    }
    if !(mass > 0.0) {
        return Err(Error::invalid("droplet mass must be > 0"));
    }
    Ok(())
}

/// Samples the initial profile on `g`.
pub fn initial_condition(spec: &InitialConditionSpec, g: &Arc<Grid>) -> Result<Field> {
    if !(spec.precursor_floor >= 0.0) {
        return Err(Error::invalid("precursor_floor must be >= 0"));
    }
    let floor = spec.precursor_floor;
    let field = match &spec.kind {
        InitialKind::Parabola { a, b, mass } => {
            check_interval(*a, *b, *mass, g)?;
            g.sample(|x| parabola_at(x, *a, *b, *mass) + floor)
        }
        InitialKind::HalfParabola { b, mass, wall } => {
            let (wall_x, len) = match wall {
                Wall::Left => (g.x_left(), b - g.x_left()),
                Wall::Right => (g.x_right(), g.x_right() - b),
            };
            if !(len > 0.0 && len <= g.length()) {
                return Err(Error::invalid(format!(
                    "half droplet edge {b} must lie strictly inside the domain"
                )));
            }
            if !(*mass > 0.0) {
                return Err(Error::invalid("droplet mass must be > 0"));
            }
            g.sample(|x| {
                let y = x - wall_x;
                1.5 * mass * (len * len - y * y).max(0.0) / len.powi(3) + floor
            })
        }
        InitialKind::TwoParabolas {
            a1,
            b1,
            m1,
            a2,
            b2,
            m2,
        } => {
            check_interval(*a1, *b1, *m1, g)?;
            check_interval(*a2, *b2, *m2, g)?;
            if b1 > a2 {
                return Err(Error::invalid(
                    "the two droplets overlap or are out of order",
                ));
            }
            g.sample(|x| parabola_at(x, *a1, *b1, *m1) + parabola_at(x, *a2, *b2, *m2) + floor)
        }
        InitialKind::Table { values } => {
            if values.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::invalid("table values must be >= 0"));
            }
            let mut v = values.clone();
            v.iter_mut().for_each(|x| *x += floor);
            Field::new(Arc::clone(g), v)?
        }
    };
    Ok(field)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub u: Field,
    pub dt: f64,
    pub step_count: u64,
    pub newton_iter_total: u64,
    /// `max(u_in)`, the scale of the undershoot allowance.
    pub u_in_max: f64,
    pub reg: RegularizationParams,
}

impl SolverState {
    pub fn new(u_in: Field, cfg: &SolverConfig) -> Self {
        let u_in_max = u_in.max().max(0.0);
        Self {
            t: 0.0,
            dt: cfg.dt_init,
            step_count: 0,
            newton_iter_total: 0,
            reg: cfg.regularization_for(u_in_max),
            u_in_max,
            u: u_in,
        }
    }
}

/// Outcome of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub dt: f64,
    pub newton_iters: u32,
    pub rejections: u32,
}

/// Residual and Jacobian of the implicit step.
struct Discretization<'a> {
    params: &'a ModelParams,
    reg: &'a RegularizationParams,
    h: f64,
}

const THIRD_DIFF: [f64; 4] = [-1.0, 3.0, -3.0, 1.0];

impl Discretization<'_> {
    /// Fluxes `q_k` at the interior faces.
    fn fluxes(&self, v: &[f64], q: &mut [f64]) {
        let n = v.len();
        let h3 = self.h.powi(3);
        for (k, qk) in q.iter_mut().enumerate().take(n - 1) {
            let mut d = 0.0;
            for (m, c) in THIRD_DIFF.iter().enumerate() {
                d += c * v[fold_ghost(k as isize - 1 + m as isize, n)];
            }
            let ubar = 0.5 * (v[k] + v[k + 1]);
            *qk = mobility::mobility_regularized(ubar, self.params, self.reg) * d / h3;
        }
    }

    fn residual(&self, v: &[f64], u: &[f64], alpha: f64, q: &mut [f64], f: &mut [f64]) {
        self.fluxes(v, q);
        let n = v.len();
        for i in 0..n {
            let right = if i + 1 < n { q[i] } else { 0.0 };
            let left = if i > 0 { q[i - 1] } else { 0.0 };
            f[i] = v[i] - u[i] + alpha * (right - left);
        }
    }

    fn jacobian(&self, v: &[f64], alpha: f64, jac: &mut BandMatrix) {
        let n = v.len();
        let h3 = self.h.powi(3);
        jac.clear();
        for i in 0..n {
            jac.add(i, i, 1.0);
        }
        for k in 0..n - 1 {
            let mut d = 0.0;
            let mut idx = [0usize; 4];
            for (m, c) in THIRD_DIFF.iter().enumerate() {
                idx[m] = fold_ghost(k as isize - 1 + m as isize, n);
                d += c * v[idx[m]];
            }
            d /= h3;
            let ubar = 0.5 * (v[k] + v[k + 1]);
            let mob = mobility::mobility_regularized(ubar, self.params, self.reg);
            let dmob = mobility::mobility_regularized_derivative(ubar, self.params);
            // dq_k/dv_j
            let mut entries: [(usize, f64); 6] = [(0, 0.0); 6];
            for m in 0..4 {
                entries[m] = (idx[m], mob * THIRD_DIFF[m] / h3);
            }
            entries[4] = (k, 0.5 * dmob * d);
            entries[5] = (k + 1, 0.5 * dmob * d);
            for &(j, dq) in &entries {
                if dq != 0.0 {
                    jac.add(k, j, alpha * dq);
                    jac.add(k + 1, j, -alpha * dq);
                }
            }
        }
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

enum NewtonOutcome {
    Converged { v: Vec<f64>, iters: u32 },
    Failed { reason: String, iters: u32 },
}

fn newton(
    u: &[f64],
    dt: f64,
    grid: &Grid,
    cfg: &SolverConfig,
    reg: &RegularizationParams,
) -> NewtonOutcome {
    let n = u.len();
    let disc = Discretization {
        params: &cfg.params,
        reg,
        h: grid.h(),
    };
    let alpha = dt * cfg.params.log_factor() / grid.h();
    let scale = sup_norm(u).max(1.0);
    let tol = cfg.newton_tol * scale;

    let mut v = u.to_vec();
    let mut q = vec![0.0; n - 1];
    let mut f = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut f_trial = vec![0.0; n];
    let mut jac = BandMatrix::pentadiagonal(n);
    disc.residual(&v, u, alpha, &mut q, &mut f);
    let mut norm = sup_norm(&f);

    for iter in 1..=cfg.newton_max_iter {
        if !norm.is_finite() {
            return NewtonOutcome::Failed {
                reason: "non-finite residual".into(),
                iters: iter,
            };
        }
        if norm <= tol {
            return NewtonOutcome::Converged { v, iters: iter };
        }
        disc.jacobian(&v, alpha, &mut jac);
        let lu = match jac.clone().factor() {
            Ok(lu) => lu,
            Err(e) => {
                return NewtonOutcome::Failed {
                    reason: e.to_string(),
                    iters: iter,
                }
            }
        };
        let mut delta: Vec<f64> = f.iter().map(|x| -x).collect();
        lu.solve_in_place(&mut delta);

        let mut lambda = 1.0;
        let mut halvings = 0;
        loop {
            for i in 0..n {
                trial[i] = v[i] + lambda * delta[i];
            }
            disc.residual(&trial, u, alpha, &mut q, &mut f_trial);
            let trial_norm = sup_norm(&f_trial);
            if trial_norm < norm || halvings == MAX_LINE_SEARCH_HALVINGS {
                break;
            }
            lambda *= 0.5;
            halvings += 1;
        }
        std::mem::swap(&mut v, &mut trial);
        std::mem::swap(&mut f, &mut f_trial);
        norm = sup_norm(&f);
        // the residual has a rounding floor ~ dt M / h⁴ · 1e-16; a full
        // update below tolerance means we are sitting on it
        if lambda == 1.0 && sup_norm(&delta) <= tol && norm.is_finite() {
            return NewtonOutcome::Converged { v, iters: iter + 1 };
        }
    }
    if norm <= tol {
        NewtonOutcome::Converged {
            v,
            iters: cfg.newton_max_iter,
        }
    } else {
        NewtonOutcome::Failed {
            reason: format!(
                "no convergence in {} iterations (residual {norm:e})",
                cfg.newton_max_iter
            ),
            iters: cfg.newton_max_iter,
        }
    }
}

/// Advances `state` by one accepted step of at most `max_dt`, halving the
/// step on Newton failure or undershoot and growing it after fast steps.
pub fn advance(state: &mut SolverState, cfg: &SolverConfig, max_dt: f64) -> Result<StepInfo> {
    let grid = Arc::clone(state.u.grid());
    let floor = -cfg.undershoot_tol * state.u_in_max;
    let mut rejections = 0;
    let mut iter_spent = 0u64;
    loop {
        let dt = state.dt.min(max_dt);
        let outcome = newton(state.u.values(), dt, &grid, cfg, &state.reg);
        let (reason, iters) = match outcome {
            NewtonOutcome::Converged { v, iters } => {
                iter_spent += iters as u64;
                let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                if min >= floor {
                    state.u = Field::new(Arc::clone(&grid), v)?;
                    state.t += dt;
                    state.step_count += 1;
                    state.newton_iter_total += iter_spent;
                    if iters <= FAST_NEWTON && dt >= state.dt {
                        state.dt = (state.dt * DT_GROWTH).min(cfg.dt_max);
                    }
                    return Ok(StepInfo {
                        dt,
                        newton_iters: iters,
                        rejections,
                    });
                }
                (format!("undershoot {min:e} below {floor:e}"), iters)
            }
            NewtonOutcome::Failed { reason, iters } => {
                iter_spent += iters as u64;
                (reason, iters)
            }
        };
        let _ = iters;
        rejections += 1;
        state.dt = dt * 0.5;
        if state.dt < cfg.dt_min {
            state.newton_iter_total += iter_spent;
            return Err(Error::StepUnderflow {
                t: state.t,
                dt: state.dt,
                dt_min: cfg.dt_min,
                reason,
            });
        }
    }
}

/// One backward-Euler step from `state`.
pub fn step(state: &SolverState, cfg: &SolverConfig) -> Result<SolverState> {
    let mut next = state.clone();
    advance(&mut next, cfg, f64::INFINITY)?;
    Ok(next)
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub u: Field,
    pub record: DiagnosticsRecord,
}

/// Why a solve stopped before `t_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    pub t: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub reg: RegularizationParams,
    pub snapshots: Vec<Snapshot>,
    /// One record per accepted step (and the initial state).
    pub steps: Vec<DiagnosticsRecord>,
    pub abort: Option<Abort>,
    pub step_count: u64,
    pub newton_iter_total: u64,
}

impl Trajectory {
    pub fn records(&self) -> impl Iterator<Item = &DiagnosticsRecord> {
        self.snapshots.iter().map(|s| &s.record)
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots
            .last()
            .expect("trajectory always holds the initial state")
    }

    /// Converts an aborted trajectory into the step error.
    pub fn into_result(self) -> Result<Self> {
        match &self.abort {
            None => Ok(self),
            Some(a) => Err(Error::StepUnderflow {
                t: a.t,
                dt: 0.0,
                dt_min: self.config.dt_min,
                reason: a.message.clone(),
            }),
        }
    }
}

/// Cumulative time integrals carried along a solve.
#[derive(Debug, Clone, Copy, Default)]
struct Running {
    cum_dissipation: f64,
    cum_bulk: f64,
}

fn nonnegative(u: &Field) -> Field {
    u.map(|v| v.max(0.0))
}

fn full_record(
    u: &Field,
    p: &ModelParams,
    t: f64,
    running: Running,
    info: Option<StepInfo>,
) -> Result<DiagnosticsRecord> {
    let mut r = diagnostics::evaluate(&nonnegative(u), p, t)?;
    r.mass = diagnostics::mass(u);
    r.cum_dissipation = running.cum_dissipation;
    r.cum_bulk = running.cum_bulk;
    if let Some(info) = info {
        r.dt = info.dt;
        r.newton_iters = info.newton_iters as u64;
    }
    Ok(r)
}

/// Integrates from `u_in` to `cfg.t_end`, recording at every multiple of
/// `record_every` and at `t_end`. A step underflow stops the solve and is
/// reported in [`Trajectory::abort`] with the last accepted state recorded.
pub fn solve(u_in: &Field, cfg: &SolverConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if u_in.min() < 0.0 {
        return Err(Error::invalid("initial data must be >= 0"));
    }
    let p = cfg.params;
    let mut state = SolverState::new(u_in.clone(), cfg);
    let mut running = Running::default();
    let first = full_record(u_in, &p, 0.0, running, None)?;
    let mut traj = Trajectory {
        config: *cfg,
        reg: state.reg,
        snapshots: vec![Snapshot {
            t: 0.0,
            u: u_in.clone(),
            record: first,
        }],
        steps: vec![first],
        abort: None,
        step_count: 0,
        newton_iter_total: 0,
    };
    if cfg.t_end == 0.0 {
        return Ok(traj);
    }

    let mut next_record = 1u64;
    let record_time = |k: u64| (k as f64 * cfg.record_every).min(cfg.t_end);
    let mut last_info = None;
    while state.t < cfg.t_end {
        let target = record_time(next_record);
        let remaining = target - state.t;
        // land exactly on the record time when the remainder is tiny
        let max_dt = if remaining <= state.dt * (1.0 + 1e-9) {
            remaining
        } else {
            remaining.min(state.dt)
        };
        match advance(&mut state, cfg, max_dt) {
            Ok(info) => {
                if max_dt == remaining && info.dt == remaining {
                    state.t = target;
                }
                let u = nonnegative(&state.u);
                let bulk = diagnostics::bulk_dissipation(&u)?;
                let diss = diagnostics::dissipation_h(&u, &p)?;
                running.cum_bulk += info.dt * bulk;
                running.cum_dissipation += info.dt * p.log_factor() * diss;
                let mut rec = DiagnosticsRecord {
                    t: state.t,
                    mass: diagnostics::mass(&state.u),
                    bulk_dissipation: bulk,
                    dissipation_h: diss,
                    cum_bulk: running.cum_bulk,
                    cum_dissipation: running.cum_dissipation,
                    dt: info.dt,
                    newton_iters: info.newton_iters as u64,
                    ..Default::default()
                };
                rec.energy = diagnostics::energy(&state.u);
                traj.steps.push(rec);
                last_info = Some(info);
                if state.t >= target {
                    let record = full_record(&state.u, &p, state.t, running, last_info)?;
                    traj.snapshots.push(Snapshot {
                        t: state.t,
                        u: state.u.clone(),
                        record,
                    });
                    next_record += 1;
                }
            }
            Err(Error::StepUnderflow { t, dt, reason, .. }) => {
                let record = full_record(&state.u, &p, state.t, running, last_info)?;
                if traj.last().t < state.t {
                    traj.snapshots.push(Snapshot {
                        t: state.t,
                        u: state.u.clone(),
                        record,
                    });
                }
                traj.abort = Some(Abort {
                    t,
                    message: format!("dt underflow ({dt:e}): {reason}"),
                });
                break;
            }
            Err(e) => return Err(e),
        }
    }
    traj.step_count = state.step_count;
    traj.newton_iter_total = state.newton_iter_total;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_uniform_grid;

    fn cfg(eps: f64, n: f64, t_end: f64) -> SolverConfig {
        SolverConfig::new(ModelParams::new(eps, n).unwrap(), t_end)
    }

    #[test]
    fn parabola_initial_condition() {
        let g = make_uniform_grid(0.0, 1.0, 1024).unwrap();
        let u = initial_condition(&InitialConditionSpec::parabola(0.0, 1.0, 1.0), &g).unwrap();
        assert!((u.max() - 1.5).abs() < 1e-5);
        assert!((crate::grid::integrate(&u) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn half_parabola_initial_condition() {
        let g = make_uniform_grid(0.0, 2.0, 2048).unwrap();
        let spec = InitialConditionSpec {
            kind: InitialKind::HalfParabola {
                b: 1.0,
                mass: 1.0,
                wall: Wall::Left,
            },
            precursor_floor: 0.0,
        };
        let u = initial_condition(&spec, &g).unwrap();
        assert!((u.values()[0] - 1.5).abs() < 1e-5);
        assert_eq!(u.values()[1024], 0.0);
        assert!((crate::grid::integrate(&u) - 1.0).abs() < 1e-6);

        let right = InitialConditionSpec {
            kind: InitialKind::HalfParabola {
                b: 1.0,
                mass: 1.0,
                wall: Wall::Right,
            },
            precursor_floor: 0.0,
        };
        let v = initial_condition(&right, &g).unwrap();
        let mirrored: Vec<f64> = u.values().iter().rev().copied().collect();
        for (a, b) in v.values().iter().zip(&mirrored) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn table_and_validation() {
        let g = make_uniform_grid(0.0, 1.0, 16).unwrap();
        let zeros = InitialConditionSpec {
            kind: InitialKind::Table {
                values: vec![0.0; 16],
            },
            precursor_floor: 0.0,
        };
        assert_eq!(initial_condition(&zeros, &g).unwrap().max(), 0.0);
        assert!(initial_condition(&InitialConditionSpec::parabola(-0.1, 0.5, 1.0), &g).is_err());
        assert!(initial_condition(&InitialConditionSpec::parabola(0.1, 0.5, 0.0), &g).is_err());
        let neg = InitialConditionSpec {
            kind: InitialKind::Table {
                values: vec![-1.0; 16],
            },
            precursor_floor: 0.0,
        };
        assert!(initial_condition(&neg, &g).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = make_uniform_grid(0.0, 1.0, 12).unwrap();
        let p = ModelParams::new(0.05, 2.0).unwrap();
        let reg = RegularizationParams { delta: 1e-6 };
        let disc = Discretization {
            params: &p,
            reg: &reg,
            h: g.h(),
        };
        let v: Vec<f64> = (0..12).map(|i| 0.2 + 0.1 * ((i * 5) % 7) as f64).collect();
        let u = vec![0.3; 12];
        let alpha = 1e-5;
        let mut jac = BandMatrix::pentadiagonal(12);
        disc.jacobian(&v, alpha, &mut jac);
        let mut q = vec![0.0; 11];
        let mut f0 = vec![0.0; 12];
        let mut f1 = vec![0.0; 12];
        for j in 0..12 {
            let eps = 1e-7;
            let mut vp = v.clone();
            vp[j] += eps;
            let mut vm = v.clone();
            vm[j] -= eps;
            disc.residual(&vp, &u, alpha, &mut q, &mut f1);
            disc.residual(&vm, &u, alpha, &mut q, &mut f0);
            for i in 0..12 {
                let fd = (f1[i] - f0[i]) / (2.0 * eps);
                let an = jac.get(i, j);
                assert!(
                    (fd - an).abs() < 1e-5 * an.abs().max(1.0),
                    "({i},{j}) {fd} vs {an}"
                );
            }
        }
    }

    #[test]
    fn constant_is_fixed_point() {
        let g = make_uniform_grid(0.0, 1.0, 64).unwrap();
        let c = cfg(1e-2, 2.0, 1.0);
        let u = g.sample(|_| 0.75);
        let state = SolverState::new(u.clone(), &c);
        let next = step(&state, &c).unwrap();
        assert_eq!(next.newton_iter_total, 1);
        assert_eq!(next.u.values(), u.values());
    }

    #[test]
    fn step_conserves_mass() {
        let g = make_uniform_grid(0.0, 1.0, 128).unwrap();
        let mut c = cfg(1e-2, 2.0, 1.0);
        c.dt_init = 1e-9;
        let u = initial_condition(&InitialConditionSpec::parabola(0.3, 0.7, 1.0), &g).unwrap();
        let state = SolverState::new(u.clone(), &c);
        let next = step(&state, &c).unwrap();
        let diff: f64 = next
            .u
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| a - b)
            .sum();
        assert!(diff.abs() <= 128.0 * c.newton_tol, "{diff}");
        assert!(next.u != u);
    }

    #[test]
    fn exact_parabola_is_near_equilibrium() {
        let g = make_uniform_grid(0.0, 1.0, 1024).unwrap();
        let mut c = cfg(1e-2, 2.0, 1.0);
        c.dt_init = 1e-8;
        c.dt_min = 1e-20;
        c.dt_max = 1e-8;
        let u = g.sample(|x| 6.0 * x * (1.0 - x));
        let state = SolverState::new(u.clone(), &c);
        let next = step(&state, &c).unwrap();
        let d: Vec<f64> = next
            .u
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| (a - b).abs())
            .collect();
        // u_xxx = 0 inside; only the wall cells, where u_x != 0 clashes with
        // the mirror ghosts, move, by an amount linear in dt
        let interior = d[16..1024 - 16].iter().fold(0.0_f64, |m, x| m.max(*x));
        let wall = d.iter().fold(0.0_f64, |m, x| m.max(*x));
        assert!(interior < 1e-6, "{interior}");
        assert!(wall < 2e4 * c.dt_max, "{wall}");
    }

    #[test]
    fn t_end_zero_gives_single_snapshot() {
        let g = make_uniform_grid(0.0, 1.0, 32).unwrap();
        let u = initial_condition(&InitialConditionSpec::parabola(0.2, 0.8, 1.0), &g).unwrap();
        let traj = solve(&u, &cfg(1e-2, 2.0, 0.0)).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.snapshots[0].u, u);
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(1e-2, 2.0, 1.0);
        c.dt_min = 1.0;
        assert!(c.validate().is_err());
        let mut c = cfg(1e-2, 2.0, 1.0);
        c.reg = Some(RegularizationParams { delta: 0.0 });
        assert!(c.validate().is_err());
    }
}
