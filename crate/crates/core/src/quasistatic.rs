//! Quasi-static droplet model: each component of the support carries a
//! parabola of fixed mass fraction and its free endpoints move with Tanner's
//! law `V = |w_x|³ / 3`. Merging and wall contact are handled as events.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GAMMA_SUM_TOL: f64 = 1e-12;
const MAX_BISECTIONS: u32 = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropletSet {
    intervals: Vec<(f64, f64)>,
    gammas: Vec<f64>,
    total_mass: f64,
    domain: (f64, f64),
}

impl DropletSet {
    pub fn new(
        intervals: Vec<(f64, f64)>,
        gammas: Vec<f64>,
        total_mass: f64,
        domain: (f64, f64),
    ) -> Result<Self> {
        if !(domain.0 < domain.1) || !domain.0.is_finite() || !domain.1.is_finite() {
            return Err(Error::invalid("domain must be a finite interval"));
        }
        if intervals.is_empty() || intervals.len() != gammas.len() {
            return Err(Error::invalid("need one mass fraction per interval"));
        }
        if !(total_mass > 0.0) {
            return Err(Error::invalid("total_mass must be > 0"));
        }
        for (i, &(a, b)) in intervals.iter().enumerate() {
            if !(a < b) {
                return Err(Error::invalid(format!("interval {i} is empty: ({a}, {b})")));
            }
            if a < domain.0 || b > domain.1 {
                return Err(Error::invalid(format!("interval {i} leaves the domain")));
            }
            if i > 0 && !(intervals[i - 1].1 < a) {
                return Err(Error::invalid("intervals must be disjoint and ordered"));
            }
        }
        if gammas.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::invalid("mass fractions must be > 0"));
        }
        let sum: f64 = gammas.iter().sum();
        if (sum - 1.0).abs() > GAMMA_SUM_TOL {
            return Err(Error::invalid(format!(
                "mass fractions sum to {sum}, not 1"
            )));
        }
        Ok(Self {
            intervals,
            gammas,
            total_mass,
            domain,
        })
    }

    /// One droplet holding all the mass.
    pub fn single(a: f64, b: f64, mass: f64, domain: (f64, f64)) -> Result<Self> {
        Self::new(vec![(a, b)], vec![1.0], mass, domain)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// `(left on wall, right on wall)` for every interval.
    pub fn wall_flags(&self) -> Vec<(bool, bool)> {
        self.intervals
            .iter()
            .map(|&(a, b)| (a <= self.domain.0, b >= self.domain.1))
            .collect()
    }

    pub fn support_length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn gamma_sum(&self) -> f64 {
        self.gammas.iter().sum()
    }

    /// Whether every interval of `self` lies inside some interval of `later`.
    pub fn is_contained_in(&self, later: &DropletSet) -> bool {
        self.intervals
            .iter()
            .all(|&(a, b)| later.intervals.iter().any(|&(c, d)| c <= a && b <= d))
    }

    fn mass_of(&self, i: usize) -> f64 {
        self.gammas[i] * self.total_mass
    }
}

/// Height of the quasi-static profile at `x`.
pub fn parabola_profile(d: &DropletSet, x: f64) -> f64 {
    let flags = d.wall_flags();
    for (i, &(a, b)) in d.intervals.iter().enumerate() {
        if x < a || x > b {
            continue;
        }
        let m = d.mass_of(i);
        let len = b - a;
        return match flags[i] {
            (true, true) => m / len,
            (true, false) => 1.5 * m * (len * len - (x - a).powi(2)) / len.powi(3),
            (false, true) => 1.5 * m * (len * len - (b - x).powi(2)) / len.powi(3),
            (false, false) => 6.0 * m * (b - x) * (x - a) / len.powi(3),
        };
    }
    0.0
}

/// `|w_x|` at every endpoint, `(left, right)` per interval; zero on walls.
pub fn endpoint_slopes(d: &DropletSet) -> Vec<(f64, f64)> {
    d.wall_flags()
        .iter()
        .enumerate()
        .map(|(i, flags)| {
            let (a, b) = d.intervals[i];
            slopes_for(d.mass_of(i), b - a, *flags)
        })
        .collect()
}

fn slopes_for(m: f64, len: f64, flags: (bool, bool)) -> (f64, f64) {
    let interior = 6.0 * m / (len * len);
    let half = 3.0 * m / (len * len);
    match flags {
        (true, true) => (0.0, 0.0),
        (true, false) => (0.0, half),
        (false, true) => (half, 0.0),
        (false, false) => (interior, interior),
    }
}

/// Tanner's law, `V = slope³ / 3`.
pub fn tanner_velocity(slope: f64) -> Result<f64> {
    if !(slope >= 0.0) {
        return Err(Error::invalid(format!("slope must be >= 0, got {slope}")));
    }
    Ok(slope.powi(3) / 3.0)
}

/// `(ȧ_i, ḃ_i)` for every interval.
pub fn endpoint_velocities(d: &DropletSet) -> Vec<(f64, f64)> {
    endpoint_slopes(d)
        .into_iter()
        .map(|(l, r)| (-l.powi(3) / 3.0, r.powi(3) / 3.0))
        .collect()
}

/// Rate of change of the total support, `Σ V` over free endpoints.
pub fn support_growth_rate(d: &DropletSet) -> f64 {
    endpoint_velocities(d).iter().map(|(va, vb)| vb - va).sum()
}

fn rates(y: &[f64], masses: &[f64], flags: &[(bool, bool)], out: &mut [f64]) {
    for (i, m) in masses.iter().enumerate() {
        let len = y[2 * i + 1] - y[2 * i];
        let (l, r) = slopes_for(*m, len, flags[i]);
        out[2 * i] = -l.powi(3) / 3.0;
        out[2 * i + 1] = r.powi(3) / 3.0;
    }
}

/// One classical Runge-Kutta step of the endpoint system. Wall endpoints
/// stay pinned and free endpoints are clamped to the domain; events are
/// left to the caller.
pub fn qs_step(d: &DropletSet, dt: f64) -> DropletSet {
    let flags = d.wall_flags();
    let masses: Vec<f64> = (0..d.len()).map(|i| d.mass_of(i)).collect();
    let y0: Vec<f64> = d.intervals.iter().flat_map(|&(a, b)| [a, b]).collect();
    let n = y0.len();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    rates(&y0, &masses, &flags, &mut k[0]);
    for (stage, frac) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
        let (prev, rest) = k.split_at_mut(stage);
        for j in 0..n {
            tmp[j] = y0[j] + frac * dt * prev[stage - 1][j];
        }
        rates(&tmp, &masses, &flags, &mut rest[0]);
    }
    let (lo, hi) = d.domain;
    let intervals = (0..d.len())
        .map(|i| {
            let step =
                |j: usize| y0[j] + dt / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
            let a = if flags[i].0 { lo } else { step(2 * i).max(lo) };
            let b = if flags[i].1 {
                hi
            } else {
                step(2 * i + 1).min(hi)
            };
            (a, b)
        })
        .collect();
    DropletSet {
        intervals,
        ..d.clone()
    }
}

/// Merges adjacent intervals whose gap is at most `merge_gap` and snaps
/// endpoints within `merge_gap` of a wall onto it.
pub fn detect_and_merge(d: &DropletSet, merge_gap: f64) -> DropletSet {
    let (lo, hi) = d.domain;
    let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(d.len());
    let mut gammas: Vec<f64> = Vec::with_capacity(d.len());
    for (&(a, b), &g) in d.intervals.iter().zip(&d.gammas) {
        match intervals.last_mut() {
            Some(last) if a - last.1 <= merge_gap => {
                last.1 = last.1.max(b);
                *gammas.last_mut().expect("parallel to intervals") += g;
            }
            _ => {
                intervals.push((a, b));
                gammas.push(g);
            }
        }
    }
    for iv in &mut intervals {
        if iv.0 - lo <= merge_gap {
            iv.0 = lo;
        }
        if hi - iv.1 <= merge_gap {
            iv.1 = hi;
        }
    }
    DropletSet {
        intervals,
        gammas,
        ..d.clone()
    }
}

/// Distance to the nearest event: the smallest gap between neighbours or
/// between a free endpoint and its wall. Infinite when nothing can happen.
fn event_distance(d: &DropletSet) -> f64 {
    let (lo, hi) = d.domain;
    let mut g = f64::INFINITY;
    for w in d.intervals.windows(2) {
        g = g.min(w[1].0 - w[0].1);
    }
    if let (Some(first), Some(last)) = (d.intervals.first(), d.intervals.last()) {
        if first.0 > lo {
            g = g.min(first.0 - lo);
        }
        if last.1 < hi {
            g = g.min(hi - last.1);
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QsConfig {
    pub dt_init: f64,
    pub dt_max: f64,
    /// `None` means `1e-9 · |Ω|`.
    #[serde(default)]
    pub merge_gap: Option<f64>,
    pub t_end: f64,
    pub record_every: f64,
    /// Steps are limited so that no interval changes length by more than
    /// this fraction.
    #[serde(default = "default_rel_step")]
    pub rel_step: f64,
}

fn default_rel_step() -> f64 {
    1e-2
}

impl QsConfig {
    pub fn new(t_end: f64, record_every: f64) -> Self {
        Self {
            dt_init: 1e-6,
            dt_max: f64::INFINITY,
            merge_gap: None,
            t_end,
            record_every,
            rel_step: default_rel_step(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0;
        if !(positive(self.dt_init) && positive(self.dt_max) && positive(self.record_every)) {
            return Err(Error::invalid(
                "dt_init, dt_max and record_every must be > 0",
            ));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::invalid("t_end must be finite and >= 0"));
        }
        if !(self.rel_step > 0.0 && self.rel_step < 1.0) {
            return Err(Error::invalid("rel_step must lie in (0,1)"));
        }
        if let Some(g) = self.merge_gap {
            if !(g > 0.0) {
                return Err(Error::invalid("merge_gap must be > 0"));
            }
        }
        Ok(())
    }

    pub fn merge_gap_for(&self, d: &DropletSet) -> f64 {
        self.merge_gap.unwrap_or(1e-9 * (d.domain.1 - d.domain.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QsState {
    pub t: f64,
    pub droplets: DropletSet,
    /// Set when the state was recorded because of a merge or wall contact.
    pub event: bool,
}

/// Integrates the quasi-static model. States are recorded at multiples of
/// `record_every`, at every event and at `t_end`.
pub fn qs_solve(d0: &DropletSet, cfg: &QsConfig) -> Result<Vec<QsState>> {
    cfg.validate()?;
    let gap = cfg.merge_gap_for(d0);
    let mut d = detect_and_merge(d0, gap);
    let mut out = vec![QsState {
        t: 0.0,
        droplets: d.clone(),
        event: d != *d0,
    }];
    let mut t = 0.0;
    let mut dt = cfg.dt_init.min(cfg.dt_max);
    let mut next_record = 1u64;
    while t < cfg.t_end {
        let target = (next_record as f64 * cfg.record_every).min(cfg.t_end);
        let rate = endpoint_velocities(&d)
            .iter()
            .zip(&d.intervals)
            .map(|((va, vb), (a, b))| (vb - va) / (b - a))
            .fold(0.0_f64, f64::max);
        if rate == 0.0 {
            // everything is frozen against the walls
            t = cfg.t_end;
            out.push(QsState {
                t,
                droplets: d.clone(),
                event: false,
            });
            break;
        }
        dt = dt.min(cfg.rel_step / rate).min(cfg.dt_max);
        let mut h = dt.min(target - t);
        let mut next = qs_step(&d, h);
        let mut event = false;
        if event_distance(&next) < 0.0 || touches_wall(&d, &next) {
            // locate the event: shrink the step until the closest approach
            // lands in [0, gap]
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..MAX_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                let trial = qs_step(&d, mid);
                let g = event_distance(&trial);
                if touches_wall(&d, &trial) || g < 0.0 {
                    hi = mid;
                } else if g > gap {
                    lo = mid;
                } else {
                    h = mid;
                    next = trial;
                    break;
                }
                h = hi;
                next = qs_step(&d, hi);
            }
            event = true;
        } else if event_distance(&next) <= gap {
            event = true;
        }
        t = if h == target - t { target } else { t + h };
        if event {
            // keep the state just before the merge so the jump is visible
            out.push(QsState {
                t,
                droplets: next.clone(),
                event: false,
            });
            next = detect_and_merge(&next, gap);
        }
        d = next;
        if event || t >= target {
            out.push(QsState {
                t,
                droplets: d.clone(),
                event,
            });
            if t >= target {
                next_record += 1;
            }
        }
        dt = (2.0 * dt).min(cfg.dt_max);
    }
    Ok(out)
}

/// A free endpoint of `before` that `qs_step` clamped onto a wall.
fn touches_wall(before: &DropletSet, after: &DropletSet) -> bool {
    before
        .wall_flags()
        .iter()
        .zip(after.wall_flags())
        .any(|(b, a)| (!b.0 && a.0) || (!b.1 && a.1))
}

/// Closed-form support bounds `(min((63t + s0⁷)^(1/7), |Ω|), (1008t + s0⁷)^(1/7))`.
pub fn support_bounds(t: f64, s0: f64, omega_len: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0) || !(s0 >= 0.0) || !(omega_len > 0.0) {
        return Err(Error::invalid(
            "support_bounds needs t >= 0, s0 >= 0, |Ω| > 0",
        ));
    }
    let general = (63.0 * t + s0.powi(7)).powf(1.0 / 7.0).min(omega_len);
    let interior = (1008.0 * t + s0.powi(7)).powf(1.0 / 7.0);
    Ok((general, interior))
}

#[cfg(test)]
mod tests {
    use super::*;

    const WIDE: (f64, f64) = (-10.0, 10.0);

    #[test]
    fn profiles_and_slopes() {
        let d = DropletSet::single(0.0, 1.0, 1.0, WIDE).unwrap();
        assert!((parabola_profile(&d, 0.5) - 1.5).abs() < 1e-15);
        assert_eq!(parabola_profile(&d, 1.5), 0.0);
        assert_eq!(endpoint_slopes(&d), vec![(6.0, 6.0)]);

        let w = DropletSet::single(0.0, 1.0, 1.0, (0.0, 5.0)).unwrap();
        assert!((parabola_profile(&w, 0.0) - 1.5).abs() < 1e-15);
        assert_eq!(endpoint_slopes(&w), vec![(0.0, 3.0)]);
        assert_eq!(parabola_profile(&w, 1.0), 0.0);
    }

    #[test]
    fn tanner_values() {
        assert_eq!(tanner_velocity(0.0).unwrap(), 0.0);
        assert!((tanner_velocity(6.0).unwrap() - 72.0).abs() < 1e-12);
        assert!((tanner_velocity(3.0).unwrap() - 9.0).abs() < 1e-12);
        assert!(tanner_velocity(-1.0).is_err());
    }

    #[test]
    fn step_rates() {
        let dt = 1e-9;
        let d = DropletSet::single(0.0, 1.0, 1.0, WIDE).unwrap();
        let (a, b) = qs_step(&d, dt).intervals()[0];
        assert!((a / dt + 72.0).abs() < 1e-4);
        assert!((b - 1.0) / dt - 72.0 < 1e-4);

        let w = DropletSet::single(0.0, 1.0, 1.0, (0.0, 5.0)).unwrap();
        let (a, b) = qs_step(&w, dt).intervals()[0];
        assert_eq!(a, 0.0);
        assert!(((b - 1.0) / dt - 9.0).abs() < 1e-4);

        let two =
            DropletSet::new(vec![(-3.0, -2.0), (2.0, 3.0)], vec![0.5, 0.5], 1.0, WIDE).unwrap();
        for (va, vb) in endpoint_velocities(&two) {
            assert!((va + 9.0).abs() < 1e-12 && (vb - 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn merging() {
        let d = DropletSet::new(
            vec![(0.0, 0.5), (0.5 + 1e-12, 1.0)],
            vec![0.5, 0.5],
            1.0,
            WIDE,
        )
        .unwrap();
        let m = detect_and_merge(&d, 1e-9);
        assert_eq!(m.intervals(), &[(0.0, 1.0)]);
        assert_eq!(m.gammas(), &[1.0]);

        let far = DropletSet::new(vec![(0.0, 0.4), (0.6, 1.0)], vec![0.5, 0.5], 1.0, WIDE).unwrap();
        assert_eq!(detect_and_merge(&far, 1e-9), far);

        let chain = DropletSet::new(
            vec![(0.0, 0.3), (0.3 + 1e-12, 0.6), (0.6 + 1e-12, 1.0)],
            vec![0.25, 0.25, 0.5],
            1.0,
            WIDE,
        )
        .unwrap();
        let m = detect_and_merge(&chain, 1e-9);
        assert_eq!(m.len(), 1);
        assert!((m.gamma_sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn interior_droplet_closed_form() {
        let d = DropletSet::single(-0.5, 0.5, 1.0, WIDE).unwrap();
        let traj = qs_solve(&d, &QsConfig::new(1.0, 1e-2)).unwrap();
        let last = traj.last().unwrap();
        assert_eq!(last.t, 1.0);
        let l = last.droplets.support_length();
        assert!((l - 1009f64.powf(1.0 / 7.0)).abs() < 1e-6, "{l}");
    }

    #[test]
    fn wall_droplet_closed_form() {
        let d = DropletSet::single(0.0, 1.0, 1.0, (0.0, 10.0)).unwrap();
        let traj = qs_solve(&d, &QsConfig::new(1.0, 1e-2)).unwrap();
        let b = traj.last().unwrap().droplets.intervals()[0].1;
        assert!((b - 2f64.powf(6.0 / 7.0)).abs() < 1e-6, "{b}");
    }

    #[test]
    fn symmetric_merge() {
        let d = DropletSet::new(
            vec![(0.2, 0.45), (0.55, 0.8)],
            vec![0.5, 0.5],
            1.0,
            (0.0, 1.0),
        )
        .unwrap();
        let cfg = QsConfig::new(1e-3, 1e-5);
        let gap = cfg.merge_gap_for(&d);
        let traj = qs_solve(&d, &cfg).unwrap();
        let merged = traj
            .iter()
            .position(|s| s.droplets.len() == 1)
            .expect("droplets merge");
        assert!(traj[merged].event);
        for w in traj.windows(2) {
            let (s0, s1) = (
                w[0].droplets.support_length(),
                w[1].droplets.support_length(),
            );
            assert!(s1 >= s0);
            assert!(w[0].droplets.is_contained_in(&w[1].droplets));
            assert!((w[1].droplets.gamma_sum() - 1.0).abs() < 1e-12);
        }
        assert_eq!(traj[merged - 1].t, traj[merged].t);
        let jump =
            traj[merged].droplets.support_length() - traj[merged - 1].droplets.support_length();
        assert!((0.0..=2.0 * gap).contains(&jump), "{jump}");
    }

    #[test]
    fn frozen_when_domain_is_filled() {
        let d = DropletSet::single(0.0, 1.0, 1.0, (0.0, 1.0)).unwrap();
        let traj = qs_solve(&d, &QsConfig::new(1.0, 0.1)).unwrap();
        assert_eq!(traj.last().unwrap().droplets.intervals(), &[(0.0, 1.0)]);
        assert!((parabola_profile(&d, 0.3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bounds() {
        assert_eq!(support_bounds(0.0, 1.0, 10.0).unwrap(), (1.0, 1.0));
        let (g, i) = support_bounds(1.0, 1.0, 10.0).unwrap();
        assert!((g - 1.811447).abs() < 1e-6 && (i - 2.686132).abs() < 1e-6);
        assert_eq!(i, 1009f64.powf(1.0 / 7.0));
        assert_eq!(support_bounds(1.0, 1.0, 1.5).unwrap().0, 1.5);
        assert!(support_bounds(-1.0, 1.0, 1.0).is_err());
    }
}
