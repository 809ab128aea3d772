//! Pointwise functions of the film height: the slip mobility and its
//! positivity regularization, the indicator approximation `B`, `B^ε` and the
//! entropy field `ρ^ε = B^ε(u)`, and the regularized entropies `H_δ`, `H₀`
//! of the rescaled `n = 1` equation.
//!
//! With `g(v) = 1 / (v^(n-1) + v^2)`,
//!
//! ```text
//! B'(s) = ∫_s^∞ g(v) dv,     B(s) = ∫_0^s B'(r) dr = ∫_0^∞ min(v, s) g(v) dv,
//! ```
//!
//! and `B''(s) = -g(s)`. Closed forms exist for `n = 1` and `n = 2`; other
//! exponents fall back to quadrature.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::quad;

/// Absolute tolerance of the quadrature fallback for `B` and `B'`.
pub const B_QUAD_TOL: f64 = 1e-10;

/// Absolute tolerance of the `H_δ` quadrature.
pub const H_QUAD_TOL: f64 = 1e-9;

/// Negative heights down to this fraction of `max(u)` are treated as solver
/// undershoot and clamped to zero before composing with `B^ε`.
pub const CLAMP_FRACTION: f64 = 1e-10;

/// Slip parameter `ε` and mobility exponent `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelParams", into = "RawModelParams")]
pub struct ModelParams {
    epsilon: f64,
    n: f64,
    log_factor: f64,
    slip: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelParams {
    epsilon: f64,
    n: f64,
}

impl TryFrom<RawModelParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawModelParams) -> Result<Self> {
        ModelParams::new(raw.epsilon, raw.n)
    }
}

impl From<ModelParams> for RawModelParams {
    fn from(p: ModelParams) -> Self {
        RawModelParams {
            epsilon: p.epsilon,
            n: p.n,
        }
    }
}

impl ModelParams {
    pub fn new(epsilon: f64, n: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid("epsilon must lie in (0,1)"));
        }
        if !(n > 0.0 && n < 3.0) {
            return Err(Error::invalid("n must lie in (0,3)"));
        }
        Ok(Self {
            epsilon,
            n,
            log_factor: -epsilon.ln(),
            slip: epsilon.powf(3.0 - n),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    /// `|ln ε|`.
    pub fn log_factor(&self) -> f64 {
        self.log_factor
    }

    /// Slip coefficient `ε^(3-n)`.
    pub fn slip(&self) -> f64 {
        self.slip
    }
}

/// The `δ` of the uniformly parabolic regularization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationParams {
    pub delta: f64,
}

impl RegularizationParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::invalid("delta must be finite and >= 0"));
        }
        Ok(Self { delta })
    }
}

/// `ε^(3-n) u^n + u^3` for `u >= 0`.
pub fn mobility(u: f64, p: &ModelParams) -> Result<f64> {
    if u < 0.0 {
        return Err(Error::invalid(format!(
            "mobility needs u >= 0, got {u:e}; use mobility_regularized"
        )));
    }
    Ok(mobility_abs(u, p))
}

#[inline]
fn mobility_abs(a: f64, p: &ModelParams) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        p.slip * a.powf(p.n) + a * a * a
    }
}

/// `mobility(|u|) + δ`, defined for every real `u`.
#[inline]
pub fn mobility_regularized(u: f64, p: &ModelParams, r: &RegularizationParams) -> f64 {
    mobility_abs(u.abs(), p) + r.delta
}

/// Derivative of [`mobility_regularized`] in `u`. The `|u|^n` term is given
/// zero slope below `1e-300` in magnitude.
#[inline]
pub fn mobility_regularized_derivative(u: f64, p: &ModelParams) -> f64 {
    let a = u.abs();
    let slip_term = if a < 1e-300 {
        0.0
    } else {
        p.slip * p.n * a.powf(p.n - 1.0)
    };
    (slip_term + 3.0 * a * a) * u.signum()
}

fn check_n(n: f64) -> Result<()> {
    if n > 0.0 && n < 3.0 {
        Ok(())
    } else {
        Err(Error::invalid("n must lie in (0,3)"))
    }
}

#[inline]
fn is_one(n: f64) -> bool {
    n == 1.0
}

#[inline]
fn is_two(n: f64) -> bool {
    n == 2.0
}

/// `1 / (v^(n-1) + v^2)`.
#[inline]
fn kernel(v: f64, n: f64) -> f64 {
    if v <= 0.0 {
        // v^(n-1) blows up for n < 1, tends to 1 for n = 1 and to 0 above
        return if n < 1.0 {
            0.0
        } else if is_one(n) {
            1.0
        } else {
            f64::INFINITY
        };
    }
    1.0 / (v.powf(n - 1.0) + v * v)
}

/// `B'(s)` by quadrature.
pub fn b_prime_quadrature(s: f64, n: f64) -> f64 {
    quad::integrate_to_infinity(|v| kernel(v, n), s, B_QUAD_TOL)
}

/// `B(s)` by quadrature of `∫_0^s v g(v) dv + s B'(s)`.
pub fn b_value_quadrature(s: f64, n: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let head = quad::integrate(|v| v * kernel(v, n), 0.0, s, 0.5 * B_QUAD_TOL);
    head + s * quad::integrate_to_infinity(|v| kernel(v, n), s, 0.5 * B_QUAD_TOL / s.max(1.0))
}

/// `B(s) = ∫_0^s ∫_r^∞ dv / (v^(n-1) + v^2) dr`.
pub fn b_value(s: f64, n: f64) -> Result<f64> {
    check_n(n)?;
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("B needs s >= 0, got {s}")));
    }
    Ok(b_value_unchecked(s, n))
}

fn b_value_unchecked(s: f64, n: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else if s.is_infinite() {
        f64::INFINITY
    } else if is_one(n) {
        s * (1.0 / s).atan() + 0.5 * (s * s).ln_1p()
    } else if is_two(n) {
        s * ln1p_recip(s) + s.ln_1p()
    } else {
        b_value_quadrature(s, n)
    }
}

/// `ln(1 + 1/s)` without overflowing `1/s` for subnormal `s`.
fn ln1p_recip(s: f64) -> f64 {
    if s < 1.0 {
        s.ln_1p() - s.ln()
    } else {
        (1.0 / s).ln_1p()
    }
}

/// `B'(s) = ∫_s^∞ dv / (v^(n-1) + v^2)`; infinite at `s = 0` for `n >= 2`.
pub fn b_prime(s: f64, n: f64) -> Result<f64> {
    check_n(n)?;
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("B' needs s >= 0, got {s}")));
    }
    Ok(b_prime_unchecked(s, n))
}

fn b_prime_unchecked(s: f64, n: f64) -> f64 {
    if is_one(n) {
        if s == 0.0 {
            FRAC_PI_2
        } else {
            (1.0 / s).atan()
        }
    } else if is_two(n) {
        if s == 0.0 {
            f64::INFINITY
        } else {
            ln1p_recip(s)
        }
    } else if s == 0.0 && n >= 2.0 {
        f64::INFINITY
    } else {
        b_prime_quadrature(s, n)
    }
}

/// `B^ε(s) = B(s/ε) / |ln ε|`.
pub fn b_eps(s: f64, p: &ModelParams) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("B^eps needs s >= 0, got {s}")));
    }
    Ok(b_value_unchecked(s / p.epsilon, p.n) / p.log_factor)
}

/// `B^ε'(s) = B'(s/ε) / (ε |ln ε|)`.
pub fn b_eps_prime(s: f64, p: &ModelParams) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("B^eps' needs s >= 0, got {s}")));
    }
    Ok(b_prime_unchecked(s / p.epsilon, p.n) / (p.epsilon * p.log_factor))
}

/// `B'(s) (s^(n-1) + s^2)`, the factor that turns `u u_xxx` into the flux
/// remainder `R^ε`. Finite at `s = 0` for every `n` in `(0,3)` except
/// `n < 1`, where it blows up like `s^(n-1)`.
pub fn remainder_factor(s: f64, n: f64) -> f64 {
    if s <= 0.0 {
        return if n < 1.0 {
            f64::INFINITY
        } else if is_one(n) {
            FRAC_PI_2
        } else {
            0.0
        };
    }
    b_prime_unchecked(s, n) * (s.powf(n - 1.0) + s * s)
}

/// Zeroes tiny negative undershoot in place; fails on larger negatives.
pub fn clamp_undershoot(values: &mut [f64]) -> Result<()> {
    let max = values.iter().copied().fold(0.0_f64, f64::max);
    let floor = -CLAMP_FRACTION * max;
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < floor {
                return Err(Error::invalid(format!(
                    "negative height {v:e} exceeds the undershoot allowance {floor:e}"
                )));
            }
            *v = 0.0;
        }
    }
    Ok(())
}

/// Copy of `u` with undershoot clamped.
pub fn clamped(u: &Field) -> Result<Field> {
    let mut out = u.clone();
    clamp_undershoot(out.values_mut())?;
    Ok(out)
}

/// `ρ^ε = B^ε(u)` pointwise.
pub fn rho_field(u: &Field, p: &ModelParams) -> Result<Field> {
    let mut rho = clamped(u)?;
    for v in rho.values_mut() {
        *v = b_value_unchecked(*v / p.epsilon, p.n) / p.log_factor;
    }
    Ok(rho)
}

/// `H₀(s) = arctan(1/s) - s ln(1 + 1/s²) / 2` for `s > 0`, `π/2` at `s = 0`
/// and `+∞` for `s < 0`.
pub fn h0_value(s: f64) -> f64 {
    if s < 0.0 {
        f64::INFINITY
    } else if s == 0.0 {
        FRAC_PI_2
    } else if s.is_infinite() {
        0.0
    } else {
        (1.0 / s).atan() - 0.5 * s * (1.0 / (s * s)).ln_1p()
    }
}

/// `H₀` as the double integral `∫_s^∞ (v - s) / (v (1 + v²)) dv`.
pub fn h0_quadrature(s: f64) -> f64 {
    quad::integrate_to_infinity(|v| (v - s) / (v * (1.0 + v * v)), s, H_QUAD_TOL)
}

/// `H_δ(s) = ∫_s^∞ ∫_r^∞ du dr / (|u| + |u|³ + δ)`, evaluated as the single
/// integral `∫_s^∞ (u - s) / f_δ(u) du`.
pub fn h_delta_value(s: f64, r: &RegularizationParams) -> Result<f64> {
    if !(r.delta > 0.0) {
        return Err(Error::invalid("H_delta needs delta > 0; use h0_value"));
    }
    let delta = r.delta;
    let f = move |u: f64| {
        let a = u.abs();
        (u - s) / (a + a * a * a + delta)
    };
    let above = quad::integrate_to_infinity(f, s.max(0.0), 0.5 * H_QUAD_TOL);
    let below = if s < 0.0 {
        quad::integrate(f, s, 0.0, 0.5 * H_QUAD_TOL)
    } else {
        0.0
    };
    Ok(above + below)
}

/// `sup_{s >= 0} B'(s)² (s^(n-1) + s²)`, the constant of the remainder
/// bound. Infinite for `n < 1`; for `n >= 1` found by a log-grid scan on
/// `[1e-8, 1e4]`, golden-section refinement, and the endpoint values at `0`
/// and `∞` (the latter is `1` since `s B'(s) → 1`). Cached per `n`.
pub fn remainder_sup_constant(n: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cache.lock().unwrap().get(&n.to_bits()) {
        return c;
    }
    let c = compute_remainder_sup(n);
    cache.lock().unwrap().insert(n.to_bits(), c);
    c
}

fn compute_remainder_sup(n: f64) -> f64 {
    if n < 1.0 {
        return f64::INFINITY;
    }
    let g = |s: f64| {
        let bp = b_prime_unchecked(s, n);
        bp * bp * (s.powf(n - 1.0) + s * s)
    };
    // s^(n-1) vanishes at 0 for n > 1, where B'(0) is finite or log-divergent
    let at_zero = if is_one(n) {
        FRAC_PI_2 * FRAC_PI_2
    } else {
        0.0
    };
    let (lo_exp, hi_exp, samples) = (-8.0_f64, 4.0_f64, 241);
    let log_s = |k: usize| lo_exp + (hi_exp - lo_exp) * k as f64 / (samples - 1) as f64;
    let (mut best_k, mut best) = (0, f64::NEG_INFINITY);
    for k in 0..samples {
        let v = g(10f64.powf(log_s(k)));
        if v > best {
            best = v;
            best_k = k;
        }
    }
    // golden section on log s around the best sample
    let mut a = log_s(best_k.saturating_sub(1));
    let mut b = log_s((best_k + 1).min(samples - 1));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let f = |t: f64| g(10f64.powf(t));
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    best.max(fc).max(fd).max(at_zero).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_uniform_grid;
    use std::f64::consts::{LN_2, PI};

    fn params(eps: f64, n: f64) -> ModelParams {
        ModelParams::new(eps, n).unwrap()
    }

    #[test]
    fn params_validate() {
        assert!(ModelParams::new(1.5, 2.0).is_err());
        assert!(ModelParams::new(0.0, 2.0).is_err());
        assert!(ModelParams::new(0.1, 3.0).is_err());
        assert!(ModelParams::new(0.1, 0.0).is_err());
        let p = params(1e-3, 2.0);
        assert!((p.log_factor() - 1000f64.ln()).abs() < 1e-14);
        assert!(RegularizationParams::new(-1.0).is_err());
    }

    #[test]
    fn subnormal_arguments_stay_finite() {
        for n in [1.0, 2.0] {
            let tiny = 1e-320;
            let b = b_value(tiny, n).unwrap();
            assert!((0.0..1e-300).contains(&b), "{b}");
            assert!(b_prime(tiny, n).unwrap().is_finite());
        }
        assert!((b_prime(0.5, 2.0).unwrap() - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mobility_values() {
        assert_eq!(mobility(0.0, &params(0.1, 2.0)).unwrap(), 0.0);
        assert!((mobility(1.0, &params(0.1, 2.0)).unwrap() - 1.1).abs() < 1e-15);
        assert!((mobility(1.0, &params(0.1, 1.0)).unwrap() - 1.01).abs() < 1e-15);
        assert!(mobility(-1.0, &params(0.1, 1.0)).is_err());
    }

    #[test]
    fn regularized_mobility_values() {
        let p = params(0.1, 1.0);
        let r = RegularizationParams::new(1e-12).unwrap();
        assert_eq!(mobility_regularized(0.0, &p, &r), 1e-12);
        let r0 = RegularizationParams::new(0.0).unwrap();
        assert!((mobility_regularized(-1.0, &p, &r0) - 1.01).abs() < 1e-15);
        assert!((mobility_regularized(1.0, &p, &r) - (1.01 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn mobility_derivative_matches_finite_difference() {
        for &n in &[0.5, 1.0, 2.0, 2.5] {
            let p = params(0.05, n);
            let r = RegularizationParams::new(1e-9).unwrap();
            for &u in &[-0.7, -0.1, 0.2, 1.3] {
                let h = 1e-6;
                let fd = (mobility_regularized(u + h, &p, &r)
                    - mobility_regularized(u - h, &p, &r))
                    / (2.0 * h);
                let an = mobility_regularized_derivative(u, &p);
                assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "n={n} u={u}");
            }
        }
    }

    #[test]
    fn b_closed_forms_known_values() {
        assert_eq!(b_value(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(b_value(0.0, 2.0).unwrap(), 0.0);
        assert_eq!(b_value(0.0, 1.7).unwrap(), 0.0);
        let b11 = b_value(1.0, 1.0).unwrap();
        assert!((b11 - (PI / 4.0 + 0.5 * LN_2)).abs() < 1e-15);
        assert!((b11 - 1.1319718).abs() < 1e-7);
        let b12 = b_value(1.0, 2.0).unwrap();
        assert!((b12 - 2.0 * LN_2).abs() < 1e-15);
        assert!(b_value(-1.0, 1.0).is_err());
        assert!(b_value(1.0, 3.0).is_err());
    }

    #[test]
    fn b_eps_known_values() {
        assert_eq!(b_eps(0.0, &params(1e-3, 1.0)).unwrap(), 0.0);
        let v = b_eps(1.0, &params(1e-3, 1.0)).unwrap();
        assert!((v - 1.144765).abs() < 1e-5, "{v}");
        let v = b_eps(1e-3, &params(1e-6, 1.0)).unwrap();
        assert!((v - 0.5724).abs() < 1e-4, "{v}");
    }

    #[test]
    fn b_eps_tends_to_one() {
        let c = 0.5;
        let mut prev = f64::INFINITY;
        for &eps in &[1e-2, 1e-4, 1e-8] {
            let v = b_eps(c, &params(eps, 1.0)).unwrap();
            let d = (v - 1.0).abs();
            assert!(d < prev);
            prev = d;
        }
        assert!(prev <= 0.02);
    }

    #[test]
    fn b_large_s_slope() {
        // s B'(s) -> 1
        let s = 100.0;
        assert!((s * b_prime(s, 1.0).unwrap() - 1.0).abs() <= 1e-4);
    }

    #[test]
    fn b_eps_strictly_increasing() {
        for &n in &[1.0, 2.0, 1.5] {
            let p = params(1e-2, n);
            let mut prev = -1.0;
            for k in 0..60 {
                let s = 1e-5 * 1.3f64.powi(k);
                let v = b_eps(s, &p).unwrap();
                assert!(v > prev, "n={n} s={s}");
                prev = v;
            }
        }
    }

    #[test]
    fn rho_field_basics() {
        let g = make_uniform_grid(0.0, 1.0, 64).unwrap();
        let p = params(1e-3, 1.0);
        let rho = rho_field(&g.zeros(), &p).unwrap();
        assert!(rho.values().iter().all(|&v| v == 0.0));

        let par = g.sample(|x| 6.0 * x * (1.0 - x));
        let rho = rho_field(&par, &p).unwrap();
        let top = b_eps(1.5, &p).unwrap();
        assert!(rho.values().iter().all(|&v| (0.0..=top).contains(&v)));

        let mut bad = par.clone();
        bad.values_mut()[3] = -1e-3;
        assert!(rho_field(&bad, &p).is_err());
        let mut tiny = par;
        tiny.values_mut()[3] = -1e-13;
        assert_eq!(rho_field(&tiny, &p).unwrap().values()[3], 0.0);
    }

    #[test]
    fn h0_values() {
        assert!((h0_value(1.0) - (PI / 4.0 - 0.5 * LN_2)).abs() < 1e-15);
        assert!((h0_value(1.0) - 0.43882).abs() < 1e-5);
        assert!(h0_value(1e8) < 1e-8);
        assert_eq!(h0_value(f64::INFINITY), 0.0);
        assert_eq!(h0_value(0.0), FRAC_PI_2);
        assert!((h0_value(1e-12) - FRAC_PI_2).abs() < 1e-9);
        assert_eq!(h0_value(-1e-3), f64::INFINITY);
        for &s in &[0.01, 0.3, 1.0, 7.0] {
            assert!((h0_quadrature(s) - h0_value(s)).abs() < 1e-9, "s={s}");
        }
    }

    #[test]
    fn h_delta_limits_and_monotonicity() {
        let tiny = RegularizationParams::new(1e-8).unwrap();
        assert!((h_delta_value(1.0, &tiny).unwrap() - h0_value(1.0)).abs() <= 1e-4);

        let r = RegularizationParams::new(1e-4).unwrap();
        let h = |s| h_delta_value(s, &r).unwrap();
        assert!(h(0.5) > h(1.0));
        assert!(h(10.0) < h(1.0));
        assert!(h(1.0) < h(0.0));
        assert!(h(0.0).is_finite());
        assert!(h(-0.1).is_finite() && h(-0.1) > h(0.0));
        assert!(h_delta_value(1.0, &RegularizationParams::new(0.0).unwrap()).is_err());
    }

    #[test]
    fn remainder_sup_constants() {
        let c1 = remainder_sup_constant(1.0);
        assert!((c1 - PI * PI / 4.0).abs() < 1e-9, "{c1}");
        let c2 = remainder_sup_constant(2.0);
        assert!((c2 - 1.0).abs() < 1e-12, "{c2}");
        assert!(remainder_sup_constant(0.5).is_infinite());
        // brute-force oracle on a dense grid never exceeds the cached value
        for &n in &[1.0, 1.5, 2.0, 2.5] {
            let c = remainder_sup_constant(n);
            for k in 0..400 {
                let s = 10f64.powf(-6.0 + 10.0 * k as f64 / 399.0);
                let bp = b_prime(s, n).unwrap();
                assert!(
                    bp * bp * (s.powf(n - 1.0) + s * s) <= c * (1.0 + 1e-9),
                    "n={n} s={s}"
                );
            }
        }
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for &n in &[1.0, 2.0] {
            for &s in &[0.01, 0.1, 1.0, 10.0, 100.0] {
                let closed = b_value(s, n).unwrap();
                let quad = b_value_quadrature(s, n);
                assert!(
                    (closed - quad).abs() <= 1e-9,
                    "n={n} s={s}: {closed} vs {quad}"
                );
                let dc = b_prime(s, n).unwrap();
                let dq = b_prime_quadrature(s, n);
                assert!((dc - dq).abs() <= 1e-9, "n={n} s={s}: {dc} vs {dq}");
            }
        }
    }

    #[test]
    fn b_eps_second_derivative_identity() {
        for &n in &[1.0, 2.0] {
            let p = params(1e-3, n);
            for k in 0..=12 {
                let s = p.epsilon() * (1.0 / p.epsilon()).powf(k as f64 / 12.0);
                let h = 1e-5 * s;
                let b = |x| b_eps(x, &p).unwrap();
                let d2 = (b(s + h) - 2.0 * b(s) + b(s - h)) / (h * h);
                let lhs = d2 * p.log_factor() * (s * s + p.slip() * s.powf(n - 1.0));
                assert!((lhs + 1.0).abs() <= 1e-4, "n={n} s={s}: {lhs}");
            }
        }
    }

    #[test]
    fn quadrature_fallback_has_kernel_curvature() {
        // B'' = -g through a centered difference of the quadrature B'
        let n = 1.5;
        for &s in &[0.05, 0.5, 5.0] {
            let h = 1e-3 * s;
            let d = (b_prime(s + h, n).unwrap() - b_prime(s - h, n).unwrap()) / (2.0 * h);
            assert!((d + kernel(s, n)).abs() <= 1e-5 * kernel(s, n), "s={s}");
        }
    }
}
