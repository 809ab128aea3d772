//! Uniform cell-centered grids, sampled fields and the finite-difference
//! stencils shared by the solver and the diagnostics.
//!
//! Cells are numbered `0..n_cells` in code; cell `i` has center
//! `x_left + (i + 1/2) h`. Interior face `k` sits between cells `k` and
//! `k + 1`, so there are `n_cells - 1` interior faces. The two boundary faces
//! carry the null-flux condition and are never stored.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Minimum number of cells: the third-difference stencil needs four
/// interior points plus the ghost layer on either side.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    x_left: f64,
    x_right: f64,
    n_cells: usize,
    h: f64,
}

impl Grid {
    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn length(&self) -> f64 {
        self.x_right - self.x_left
    }

    /// Center of cell `i` (zero based).
    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_left + (i as f64 + 0.5) * self.h
    }

    /// Position of interior face `k`, between cells `k` and `k + 1`.
    #[inline]
    pub fn face(&self, k: usize) -> f64 {
        self.x_left + (k as f64 + 1.0) * self.h
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Samples `f` at every cell center.
    pub fn sample<F: Fn(f64) -> f64>(self: &Arc<Self>, f: F) -> Field {
        let values = (0..self.n_cells).map(|i| f(self.center(i))).collect();
        Field {
            grid: Arc::clone(self),
            values,
        }
    }

    pub fn zeros(self: &Arc<Self>) -> Field {
        Field {
            grid: Arc::clone(self),
            values: vec![0.0; self.n_cells],
        }
    }
}

/// Builds a uniform grid on `[x_left, x_right]` with `n_cells` cells.
pub fn make_uniform_grid(x_left: f64, x_right: f64, n_cells: usize) -> Result<Arc<Grid>> {
    if !x_left.is_finite() || !x_right.is_finite() {
        return Err(Error::invalid("grid bounds must be finite"));
    }
    if x_left >= x_right {
        return Err(Error::invalid("grid requires x_left < x_right"));
    }
    if n_cells < MIN_CELLS {
        return Err(Error::invalid(format!(
            "grid needs at least {MIN_CELLS} cells, got {n_cells}"
        )));
    }
    Ok(Arc::new(Grid {
        x_left,
        x_right,
        n_cells,
        h: (x_right - x_left) / n_cells as f64,
    }))
}

/// Cell-centered samples of a scalar function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::invalid(format!(
                "field has {} values but the grid has {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// A new field on the same grid with `f` applied pointwise.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Field, f: F) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Linear combination `alpha * self + beta * other`.
    pub fn axpby(&self, alpha: f64, other: &Field, beta: f64) -> Field {
        self.zip_map(other, |a, b| alpha * a + beta * b)
    }
}

/// Midpoint quadrature `h * sum(f_i)`.
pub fn integrate(f: &Field) -> f64 {
    f.grid.h * f.values.iter().sum::<f64>()
}

/// How stencils reach past the first and last cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryClosure {
    /// One layer of mirror ghosts, `f_{-1} = f_0` and `f_N = f_{N-1}`.
    /// This is the discrete form of `u_x = 0` at the walls and is what the
    /// solver uses.
    #[default]
    Reflect,
    /// Shifted one-sided stencils of the same order, exact on polynomials of
    /// the stencil's degree. Used when differentiating data that need not
    /// satisfy the wall condition (analytic profiles, stored snapshots).
    OneSided,
}

/// Value at index `j` (possibly a ghost index) under mirror reflection.
#[inline]
fn reflected(v: &[f64], j: isize) -> f64 {
    let n = v.len() as isize;
    let idx = if j < 0 {
        -j - 1
    } else if j >= n {
        2 * n - j - 1
    } else {
        j
    };
    v[idx as usize]
}

/// Index with one layer of mirror ghosts folded back onto the grid.
#[inline]
pub(crate) fn fold_ghost(j: isize, n: usize) -> usize {
    let n = n as isize;
    if j < 0 {
        (-j - 1) as usize
    } else if j >= n {
        (2 * n - j - 1) as usize
    } else {
        j as usize
    }
}

/// Third derivative at every interior face with mirror ghosts.
pub fn face_third_derivative(f: &Field) -> Vec<f64> {
    face_third_derivative_with(f, BoundaryClosure::Reflect)
}

/// Third derivative at every interior face, `(f_{k+2} - 3 f_{k+1} + 3 f_k -
/// f_{k-1}) / h^3`, with the chosen closure at the two extreme faces.
pub fn face_third_derivative_with(f: &Field, closure: BoundaryClosure) -> Vec<f64> {
    let v = &f.values;
    let n = v.len();
    let h3 = f.grid.h.powi(3);
    (0..n - 1)
        .map(|k| {
            let start = match closure {
                BoundaryClosure::Reflect => k as isize - 1,
                BoundaryClosure::OneSided => (k as isize - 1).clamp(0, n as isize - 4),
            };
            let s = |o: isize| reflected(v, start + o);
            (s(3) - 3.0 * s(2) + 3.0 * s(1) - s(0)) / h3
        })
        .collect()
}

/// Centered first and second differences at cell centers with mirror ghosts.
pub fn cell_first_and_second_derivative(f: &Field) -> (Field, Field) {
    cell_first_and_second_derivative_with(f, BoundaryClosure::Reflect)
}

/// Centered first and second differences at cell centers. With
/// [`BoundaryClosure::OneSided`] the two boundary cells use the second-order
/// one-sided first difference and the second difference of the neighbouring
/// cell, both exact on quadratics.
pub fn cell_first_and_second_derivative_with(
    f: &Field,
    closure: BoundaryClosure,
) -> (Field, Field) {
    let v = &f.values;
    let n = v.len();
    let h = f.grid.h;
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 0..n {
        let c = i as isize;
        let left = reflected(v, c - 1);
        let right = reflected(v, c + 1);
        d1[i] = (right - left) / (2.0 * h);
        d2[i] = (right - 2.0 * v[i] + left) / (h * h);
    }
    if closure == BoundaryClosure::OneSided {
        d1[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
        d2[0] = (v[2] - 2.0 * v[1] + v[0]) / (h * h);
        d1[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
        d2[n - 1] = (v[n - 1] - 2.0 * v[n - 2] + v[n - 3]) / (h * h);
    }
    let grid = &f.grid;
    (
        Field {
            grid: Arc::clone(grid),
            values: d1,
        },
        Field {
            grid: Arc::clone(grid),
            values: d2,
        },
    )
}

/// First difference at every face including the two boundary faces, where
/// the mirror ghosts make it vanish.
pub fn face_first_derivative(f: &Field) -> Vec<f64> {
    let v = &f.values;
    let n = v.len() as isize;
    let h = f.grid.h;
    (-1..n)
        .map(|k| (reflected(v, k + 1) - reflected(v, k)) / h)
        .collect()
}

/// Arithmetic mean of the two cells adjacent to each interior face.
pub fn face_average(f: &Field) -> Vec<f64> {
    f.values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_spacing_and_centers() {
        let g = make_uniform_grid(0.0, 1.0, 10).unwrap();
        assert_eq!(g.h(), 0.1);
        assert!((g.center(0) - 0.05).abs() < 1e-15);

        let g = make_uniform_grid(-1.0, 1.0, 8).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.center(7), 0.875);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(make_uniform_grid(0.0, 1.0, 4).is_err());
        assert!(make_uniform_grid(1.0, 0.0, 16).is_err());
        assert!(make_uniform_grid(0.0, f64::INFINITY, 16).is_err());
        assert!(make_uniform_grid(f64::NAN, 1.0, 16).is_err());
    }

    #[test]
    fn centers_strictly_increasing_and_equispaced() {
        let g = make_uniform_grid(-0.3, 2.1, 97).unwrap();
        let xs = g.centers();
        for w in xs.windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - g.h()).abs() < 1e-14);
        }
    }

    #[test]
    fn field_length_checked() {
        let g = make_uniform_grid(0.0, 1.0, 8).unwrap();
        assert!(Field::new(g.clone(), vec![0.0; 7]).is_err());
        assert!(Field::new(g, vec![0.0; 8]).is_ok());
    }

    #[test]
    fn integrate_constants_and_parabola() {
        let g = make_uniform_grid(0.0, 1.0, 10).unwrap();
        assert_eq!(integrate(&g.sample(|_| 1.0)), 1.0);
        assert_eq!(integrate(&g.zeros()), 0.0);

        let g = make_uniform_grid(0.0, 1.0, 1024).unwrap();
        let p = g.sample(|x| 6.0 * x * (1.0 - x));
        assert!((integrate(&p) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn third_derivative_on_polynomials() {
        let g = make_uniform_grid(0.0, 1.0, 32).unwrap();
        let n = g.n_cells();
        let cubic = face_third_derivative(&g.sample(|x| x * x * x));
        for d in &cubic[1..n - 2] {
            assert!((d - 6.0).abs() < 1e-6, "{d}");
        }
        for d in face_third_derivative(&g.sample(|_| 3.0)) {
            assert_eq!(d, 0.0);
        }
        let quad = face_third_derivative(&g.sample(|x| x * x));
        for d in &quad[1..n - 2] {
            assert!(d.abs() < 1e-6, "{d}");
        }
        // one-sided closure is exact at the extreme faces too
        let cubic = face_third_derivative_with(&g.sample(|x| x * x * x), BoundaryClosure::OneSided);
        for d in &cubic {
            assert!((d - 6.0).abs() < 1e-6, "{d}");
        }
    }

    #[test]
    fn first_and_second_derivative() {
        let g = make_uniform_grid(0.0, 1.0, 64).unwrap();
        let n = g.n_cells();
        let (d1, d2) = cell_first_and_second_derivative(&g.sample(|x| x));
        for i in 1..n - 1 {
            assert!((d1.values()[i] - 1.0).abs() < 1e-12);
            assert!(d2.values()[i].abs() < 1e-9);
        }
        let (_, d2) = cell_first_and_second_derivative(&g.sample(|x| 6.0 * x * (1.0 - x)));
        for i in 1..n - 1 {
            assert!((d2.values()[i] + 12.0).abs() < 1e-10);
        }
        let (d1, d2) = cell_first_and_second_derivative(&g.sample(|_| 5.0));
        assert!(d1.values().iter().chain(d2.values()).all(|&d| d == 0.0));

        let (d1, d2) = cell_first_and_second_derivative_with(
            &g.sample(|x| 6.0 * x * (1.0 - x)),
            BoundaryClosure::OneSided,
        );
        for i in 0..n {
            let x = g.center(i);
            assert!((d1.values()[i] - (6.0 - 12.0 * x)).abs() < 1e-10);
            assert!((d2.values()[i] + 12.0).abs() < 1e-8);
        }
    }

    #[test]
    fn reflection_zeroes_boundary_face_gradient() {
        let g = make_uniform_grid(0.0, 2.0, 16).unwrap();
        let d = face_first_derivative(&g.sample(|x| (3.0 * x).sin() + x * x));
        assert_eq!(d.len(), 17);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[16], 0.0);
    }

    #[test]
    fn fold_ghost_matches_reflection() {
        let v: Vec<f64> = (0..8).map(|i| i as f64).collect();
        for j in -1..=8isize {
            assert_eq!(v[fold_ghost(j, 8)], reflected(&v, j));
        }
    }
}
