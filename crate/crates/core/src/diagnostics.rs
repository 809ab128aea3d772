//! Functionals of a film profile: the quantities the small-slip analysis
//! bounds or passes to the limit.
//!
//! All derivatives here use [`BoundaryClosure::OneSided`] so that profiles
//! which do not satisfy the wall condition (exact parabolas, stored
//! snapshots) are differentiated to full order at the boundary cells. Fields
//! that may carry solver undershoot are clamped first (see
//! [`mobility::clamp_undershoot`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    cell_first_and_second_derivative_with, face_average, face_third_derivative_with, integrate,
    BoundaryClosure, Field,
};
use crate::mobility::{self, ModelParams};

const CLOSURE: BoundaryClosure = BoundaryClosure::OneSided;

/// One row of the diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    /// `h^ε = ∫ M(u) |u_xxx|²`.
    pub dissipation_h: f64,
    /// `∫_0^t |ln ε| h^ε`.
    pub cum_dissipation: f64,
    /// `∫ ρ^ε`.
    pub entropy_integral: f64,
    /// `∫ u |u_xx|²`.
    pub bulk_dissipation: f64,
    /// `∫_0^t ∫ u |u_xx|²`.
    pub cum_bulk: f64,
    /// `|{u > ε}|`.
    pub support_measure: f64,
    /// `‖u_x‖∞²`.
    pub sup_slope_sq: f64,
    /// `(1 + |ln ε| h^ε)^½`.
    pub lipschitz_rhs: f64,
    /// `∫ |R^ε|`.
    pub weak_r_l1: f64,
    /// Right-hand side of the `R^ε` bound.
    pub weak_r_bound: f64,
    pub dt: f64,
    pub newton_iters: u64,
}

impl DiagnosticsRecord {
    pub fn lipschitz_ratio(&self) -> f64 {
        self.sup_slope_sq / self.lipschitz_rhs
    }

    pub fn remainder_bound_holds(&self) -> bool {
        self.weak_r_l1 <= self.weak_r_bound * (1.0 + REMAINDER_SLACK)
    }

    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.mass,
            self.energy,
            self.dissipation_h,
            self.cum_dissipation,
            self.entropy_integral,
            self.bulk_dissipation,
            self.cum_bulk,
            self.support_measure,
            self.sup_slope_sq,
            self.lipschitz_rhs,
            self.weak_r_l1,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Relative slack of the `R^ε` bound check.
pub const REMAINDER_SLACK: f64 = 1e-6;

/// Evaluates every instantaneous field of a record. The cumulative
/// integrals, `dt` and `newton_iters` are left at zero for the caller.
pub fn evaluate(u: &Field, p: &ModelParams, t: f64) -> Result<DiagnosticsRecord> {
    let u = mobility::clamped(u)?;
    let rb = weak_r_l1(&u, p)?;
    let lip = lipschitz_ratio(&u, p)?;
    Ok(DiagnosticsRecord {
        t,
        mass: mass(&u),
        energy: energy(&u),
        dissipation_h: rb.dissipation_h,
        cum_dissipation: 0.0,
        entropy_integral: entropy_integral(&u, p)?,
        bulk_dissipation: bulk_dissipation(&u)?,
        cum_bulk: 0.0,
        support_measure: apparent_support(&u, p.epsilon())?,
        sup_slope_sq: lip.lhs,
        lipschitz_rhs: lip.rhs_core,
        weak_r_l1: rb.lhs,
        weak_r_bound: rb.rhs,
        dt: 0.0,
        newton_iters: 0,
    })
}

/// `∫ u`.
pub fn mass(u: &Field) -> f64 {
    integrate(u)
}

/// `½ ∫ |u_x|²`.
pub fn energy(u: &Field) -> f64 {
    let (d1, _) = cell_first_and_second_derivative_with(u, CLOSURE);
    0.5 * integrate(&d1.map(|v| v * v))
}

/// `h^ε = ∫ (ε^(3-n) uⁿ + u³) |u_xxx|²` by face quadrature with the face
/// mobility taken at the mean of the adjacent cells.
pub fn dissipation_h(u: &Field, p: &ModelParams) -> Result<f64> {
    let u = mobility::clamped(u)?;
    let h = u.grid().h();
    let d3 = face_third_derivative_with(&u, CLOSURE);
    let avg = face_average(&u);
    let mut sum = 0.0;
    for (&uf, &d) in avg.iter().zip(&d3) {
        sum += mobility::mobility(uf, p)? * d * d;
    }
    Ok(h * sum)
}

/// `∫ ρ^ε`.
pub fn entropy_integral(u: &Field, p: &ModelParams) -> Result<f64> {
    Ok(integrate(&mobility::rho_field(u, p)?))
}

/// `∫ u |u_xx|²`.
pub fn bulk_dissipation(u: &Field) -> Result<f64> {
    let u = mobility::clamped(u)?;
    let (_, d2) = cell_first_and_second_derivative_with(&u, CLOSURE);
    Ok(integrate(&u.zip_map(&d2, |a, b| a * b * b)))
}

/// Measure of `{u > threshold}` for the piecewise-linear interpolant through
/// the cell centers, held constant over the outer half cells.
pub fn apparent_support(u: &Field, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::invalid("apparent_support needs threshold > 0"));
    }
    let v = u.values();
    let h = u.grid().h();
    let n = v.len();
    let mut total = 0.0;
    if v[0] > threshold {
        total += 0.5 * h;
    }
    if v[n - 1] > threshold {
        total += 0.5 * h;
    }
    for w in v.windows(2) {
        let (a, b) = (w[0], w[1]);
        total += match (a > threshold, b > threshold) {
            (true, true) => h,
            (false, false) => 0.0,
            (true, false) => h * (a - threshold) / (a - b),
            (false, true) => h * (b - threshold) / (b - a),
        };
    }
    Ok(total)
}

/// A test function sampled with its first two derivatives.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub phi: Field,
    pub dphi: Field,
    pub d2phi: Field,
}

impl TestFunction {
    pub fn new(phi: Field, dphi: Field, d2phi: Field) -> Result<Self> {
        if phi.len() != dphi.len() || phi.len() != d2phi.len() {
            return Err(Error::invalid("test function samples differ in length"));
        }
        Ok(Self { phi, dphi, d2phi })
    }

    /// Samples analytic `φ`, `φ'`, `φ''` on the grid of `like`.
    pub fn sample<F, G, H>(like: &Field, phi: F, dphi: G, d2phi: H) -> Self
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
        H: Fn(f64) -> f64,
    {
        let g = like.grid();
        Self {
            phi: g.sample(phi),
            dphi: g.sample(dphi),
            d2phi: g.sample(d2phi),
        }
    }

    pub fn constant_one(like: &Field) -> Self {
        Self::sample(like, |_| 1.0, |_| 0.0, |_| 0.0)
    }
}

/// `⟨T^ε, φ⟩ = ∫ u u_xx² φ - (5/6) ∫ u_x³ φ' - ½ ∫ u u_x² φ''`.
pub fn weak_t(u: &Field, phi: &TestFunction) -> Result<f64> {
    if phi.phi.len() != u.len() {
        return Err(Error::invalid("test function and field differ in length"));
    }
    let u = mobility::clamped(u)?;
    let (d1, d2) = cell_first_and_second_derivative_with(&u, CLOSURE);
    let h = u.grid().h();
    let (uv, d1, d2) = (u.values(), d1.values(), d2.values());
    let mut sum = 0.0;
    for i in 0..uv.len() {
        sum += uv[i] * d2[i] * d2[i] * phi.phi.values()[i]
            - (5.0 / 6.0) * d1[i].powi(3) * phi.dphi.values()[i]
            - 0.5 * uv[i] * d1[i] * d1[i] * phi.d2phi.values()[i];
    }
    Ok(h * sum)
}

/// Both sides of `∫|R^ε| <= C |ln ε|^(-½) (∫ |ln ε| M |u_xxx|²)^½`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderBound {
    pub lhs: f64,
    pub rhs: f64,
    /// `C = (C_sup ∫u)^½`.
    pub constant: f64,
    pub dissipation_h: f64,
    pub holds: bool,
}

/// `∫ |R^ε|` with `R^ε = -|ln ε| B^ε'(u) (ε^(3-n) u^(n-1) + u²) u u_xxx`,
/// evaluated on faces like [`dissipation_h`], and the matching bound.
///
/// With `s = u/ε` the integrand is `ε B'(s) (s^(n-1) + s²) u |u_xxx|`, and
/// Cauchy–Schwarz against `M |u_xxx|²` leaves `B'(s)² (s^(n-1) + s²) u`,
/// which is at most `C_sup u`.
pub fn weak_r_l1(u: &Field, p: &ModelParams) -> Result<RemainderBound> {
    let u = mobility::clamped(u)?;
    let h = u.grid().h();
    let eps = p.epsilon();
    let d3 = face_third_derivative_with(&u, CLOSURE);
    let avg = face_average(&u);
    let (mut r_sum, mut m_sum) = (0.0, 0.0);
    for (&uf, &d) in avg.iter().zip(&d3) {
        if uf > 0.0 {
            let factor = mobility::remainder_factor(uf / eps, p.n());
            r_sum += eps * factor * uf * d.abs();
            m_sum += mobility::mobility(uf, p)? * d * d;
        }
    }
    let lhs = h * r_sum;
    let dissipation_h = h * m_sum;
    let c_sup = mobility::remainder_sup_constant(p.n());
    let constant = (c_sup * mass(&u)).sqrt();
    let lf = p.log_factor();
    let rhs = if lhs == 0.0 {
        0.0
    } else {
        constant / lf.sqrt() * (lf * dissipation_h).sqrt()
    };
    Ok(RemainderBound {
        lhs,
        rhs,
        constant,
        dissipation_h,
        holds: lhs <= rhs * (1.0 + REMAINDER_SLACK),
    })
}

/// `‖u_x‖∞²` against `(1 + |ln ε| h^ε)^½`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzCheck {
    pub lhs: f64,
    pub rhs_core: f64,
    pub ratio: f64,
}

pub fn lipschitz_ratio(u: &Field, p: &ModelParams) -> Result<LipschitzCheck> {
    let u = mobility::clamped(u)?;
    let (d1, _) = cell_first_and_second_derivative_with(&u, CLOSURE);
    let slope = d1.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let lhs = slope * slope;
    let rhs_core = (1.0 + p.log_factor() * dissipation_h(&u, p)?).sqrt();
    Ok(LipschitzCheck {
        lhs,
        rhs_core,
        ratio: lhs / rhs_core,
    })
}
