//! Thin film equation with small slippage in one space dimension.
//!
//! The crate integrates
//!
//! ```text
//! |ln ε|⁻¹ ∂_t u + ∂_x((ε^(3-n) uⁿ + u³) ∂_xxx u) = 0   in Ω,
//! (ε^(3-n) uⁿ + u³) ∂_xxx u = 0,  ∂_x u = 0           on ∂Ω,
//! ```
//!
//! with a conservative backward-Euler scheme, evaluates the functionals that
//! control its small-slip limit (mass, energy, the entropy field
//! `ρ^ε = B^ε(u)`, bulk dissipation, the weak contact-line term), and
//! integrates the limiting quasi-static model in which each droplet is a
//! parabola whose contact lines move by Tanner's law `V = |w_x|³ / 3`.

// `!(x > 0.0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod mobility;
pub mod quad;
pub mod quasistatic;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{make_uniform_grid, Field, Grid};
pub use mobility::{ModelParams, RegularizationParams};
