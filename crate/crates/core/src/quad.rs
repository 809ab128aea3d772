//! Adaptive quadrature on top of the double-exponential rule from the
//! `quadrature` crate: the rule runs on the whole interval and the interval
//! is bisected recursively while the error estimate misses its share of the
//! tolerance.

use quadrature::double_exponential;

const MAX_DEPTH: u32 = 18;

/// Relative accuracy below which further bisection only chases rounding.
const REL_FLOOR: f64 = 1e-14;

/// `∫_a^b f` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -integrate(f, b, a, tol);
    }
    adaptive(&f, a, b, tol, 0)
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let out = double_exponential::integrate(f, a, b, tol);
    if out.error_estimate <= tol.max(REL_FLOOR * out.integral.abs()) || depth >= MAX_DEPTH {
        return out.integral;
    }
    let mid = 0.5 * (a + b);
    adaptive(f, a, mid, 0.5 * tol, depth + 1) + adaptive(f, mid, b, 0.5 * tol, depth + 1)
}

/// `∫_a^∞ f` for integrands decaying at least like `1/x^2`. The tail beyond
/// `c = max(a, 1)` is mapped onto `(0, 1]` with `x = c / w`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    let c = a.max(1.0);
    let head = if a < c {
        integrate(&f, a, c, 0.5 * tol)
    } else {
        0.0
    };
    let tail = integrate(
        |w: f64| {
            if w <= 0.0 {
                0.0
            } else {
                let x = c / w;
                f(x) * c / (w * w)
            }
        },
        0.0,
        1.0,
        0.5 * tol,
    );
    head + tail
}
