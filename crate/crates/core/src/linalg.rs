//! Banded LU factorization with partial pivoting.
//!
//! Storage follows the usual band layout with room for pivoting fill-in:
//! row `i` keeps columns `i - kl ..= i + ku + kl`, so `U` ends up with
//! `ku + kl` superdiagonals.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    /// A pentadiagonal matrix (two sub- and two superdiagonals).
    pub fn pentadiagonal(n: usize) -> Self {
        Self::zeros(n, 2, 2)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.data.fill(0.0);
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `v` to entry `(i, j)`; panics if `(i, j)` lies outside the band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside the band");
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    /// `y = A x` (before factorization).
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Factors in place and returns the factorization.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.ku + self.kl;
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::invalid(format!(
                    "singular band matrix at column {k}"
                )));
            }
            pivots[k] = p;
            let jmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.slot(k, j);
                    let b = self.slot(p, j);
                    self.data.swap(a, b);
                }
            }
            let diag = self.get(k, k);
            for i in k + 1..=last {
                let sik = self.slot(i, k);
                let l = self.data[sik] / diag;
                self.data[sik] = l;
                if l != 0.0 {
                    for j in k + 1..=jmax {
                        let skj = self.data[self.slot(k, j)];
                        let sij = self.slot(i, j);
                        self.data[sij] -= l * skj;
                    }
                }
            }
        }
        Ok(BandLu { a: self, pivots })
    }
}

/// LU factors of a [`BandMatrix`].
#[derive(Debug, Clone)]
pub struct BandLu {
    a: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let a = &self.a;
        let n = a.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + a.kl).min(n - 1) {
                    b[i] -= a.get(i, k) * bk;
                }
            }
        }
        let reach = a.ku + a.kl;
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                s -= a.get(i, j) * b[j];
            }
            b[i] = s / a.get(i, i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))
                .unwrap();
            m.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let l = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= l * m[k][j];
                }
                b[i] -= l * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / m[i][i];
        }
        x
    }

    #[test]
    fn matches_dense_elimination_with_pivoting() {
        let n = 12;
        let mut a = BandMatrix::pentadiagonal(n);
        let mut dense = vec![vec![0.0; n]; n];
        // small diagonal forces row exchanges
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                let v = if i == j {
                    1e-3 * (i as f64 + 1.0)
                } else {
                    ((i * 7 + j * 3) % 11) as f64 - 5.0
                };
                a.set(i, j, v);
                dense[i][j] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let expected = dense_solve(dense, b.clone());
        let mut x = b.clone();
        a.clone().factor().unwrap().solve_in_place(&mut x);
        for (u, v) in x.iter().zip(&expected) {
            assert!((u - v).abs() < 1e-9 * v.abs().max(1.0), "{u} vs {v}");
        }
        let r = a.mul_vec(&x);
        for (u, v) in r.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn fourth_difference_system() {
        let n = 64;
        let mut a = BandMatrix::pentadiagonal(n);
        let stencil = [1.0, -4.0, 6.0, -4.0, 1.0];
        for i in 0..n {
            for (o, c) in stencil.iter().enumerate() {
                let j = i as isize + o as isize - 2;
                if (0..n as isize).contains(&j) {
                    a.add(i, j as usize, 0.1 * c);
                }
            }
            a.add(i, i, 1.0);
        }
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i % 3) as f64).collect();
        let mut x = b.clone();
        a.clone().factor().unwrap().solve_in_place(&mut x);
        for (u, v) in a.mul_vec(&x).iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = BandMatrix::pentadiagonal(5);
        assert!(a.factor().is_err());
    }
}
