//! Fixed-capacity dense vectors and matrices for per-point tensor algebra.
//!
//! Everything here lives on the stack; spatial dimension is at most 3 and
//! spacetime dimension at most 4.

use crate::error::{ImcfError, Result};
use std::ops::{Index, IndexMut};

pub const MAX_DIM: usize = 4;

/// Condition-number estimate above which a metric is treated as singular.
pub const COND_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vect {
    n: usize,
    v: [f64; MAX_DIM],
}

impl Vect {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_DIM, "dimension {n} exceeds {MAX_DIM}");
        Vect { n, v: [0.0; MAX_DIM] }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        let mut out = Vect::zeros(s.len());
        out.v[..s.len()].copy_from_slice(s);
        out
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.v[..self.n]
    }

    pub fn dot(&self, other: &Vect) -> f64 {
        debug_assert_eq!(self.n, other.n);
        (0..self.n).map(|i| self.v[i] * other.v[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for x in &mut self.v[..self.n] {
            *x *= s;
        }
        self
    }
}

impl Index<usize> for Vect {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        debug_assert!(i < self.n);
        &self.v[i]
    }
}

impl IndexMut<usize> for Vect {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        debug_assert!(i < self.n);
        &mut self.v[i]
    }
}

/// Square matrix of order `n <= MAX_DIM`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat {
    n: usize,
    m: [[f64; MAX_DIM]; MAX_DIM],
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_DIM, "dimension {n} exceeds {MAX_DIM}");
        Mat { n, m: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Mat::zeros(n);
        for i in 0..n {
            out.m[i][i] = 1.0;
        }
        out
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut out = Mat::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            out.m[i][i] = x;
        }
        out
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.m[i][j] = f(i, j);
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for row in &mut self.m[..self.n] {
            for x in &mut row[..self.n] {
                *x *= s;
            }
        }
        self
    }

    pub fn add(&self, other: &Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| self.m[i][j] + other.m[i][j])
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| self.m[i][j] - other.m[i][j])
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| (0..self.n).map(|k| self.m[i][k] * other.m[k][j]).sum())
    }

    pub fn mul_vec(&self, v: &Vect) -> Vect {
        let mut out = Vect::zeros(self.n);
        for i in 0..self.n {
            out[i] = (0..self.n).map(|j| self.m[i][j] * v[j]).sum();
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| self.m[j][i])
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.m[i][i]).sum()
    }

    /// `v^T A w`.
    pub fn bilinear(&self, v: &Vect, w: &Vect) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += v[i] * self.m[i][j] * w[j];
            }
        }
        s
    }

    /// Full contraction `sum_ij A_ij B_ij`.
    pub fn contract(&self, other: &Mat) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.m[i][j] * other.m[i][j];
            }
        }
        s
    }

    pub fn symmetrized(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| 0.5 * (self.m[i][j] + self.m[j][i]))
    }

    pub fn max_abs(&self) -> f64 {
        let mut s = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                s = s.max(self.m[i][j].abs());
            }
        }
        s
    }

    pub fn is_finite(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.m[i][j].is_finite()))
    }

    /// Cholesky factorization of a symmetric positive definite matrix.
    pub fn cholesky(&self) -> Result<Cholesky> {
        let n = self.n;
        let mut l = Mat::zeros(n);
        for j in 0..n {
            let mut d = self.m[j][j];
            for k in 0..j {
                d -= l.m[j][k] * l.m[j][k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(ImcfError::SingularMetric(format!(
                    "matrix not positive definite (pivot {d:e} in column {j})"
                )));
            }
            let djj = d.sqrt();
            l.m[j][j] = djj;
            for i in (j + 1)..n {
                let mut s = self.m[i][j];
                for k in 0..j {
                    s -= l.m[i][k] * l.m[j][k];
                }
                l.m[i][j] = s / djj;
            }
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            lo = lo.min(l.m[i][i]);
            hi = hi.max(l.m[i][i]);
        }
        let cond = (hi / lo).powi(2);
        if cond > COND_CAP {
            return Err(ImcfError::SingularMetric(format!(
                "condition estimate {cond:e} exceeds {COND_CAP:e}"
            )));
        }
        Ok(Cholesky { l })
    }

    /// Eigenvalues of a symmetric matrix, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vect {
        let dm = nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.m[i][j]);
        let ev = dm.symmetric_eigenvalues();
        let mut vals: Vec<f64> = ev.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        Vect::from_slice(&vals)
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.n && j < self.n);
        &self.m[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.n && j < self.n);
        &mut self.m[i][j]
    }
}

/// Lower-triangular factor `L` with `A = L L^T`.
#[derive(Debug, Clone, Copy)]
pub struct Cholesky {
    l: Mat,
}

impl Cholesky {
    pub fn factor(&self) -> &Mat {
        &self.l
    }

    pub fn det(&self) -> f64 {
        let p: f64 = (0..self.l.n).map(|i| self.l.m[i][i]).product();
        p * p
    }

    pub fn solve(&self, b: &Vect) -> Vect {
        let n = self.l.n;
        let mut y = Vect::zeros(n);
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l.m[i][k] * y[k];
            }
            y[i] = s / self.l.m[i][i];
        }
        let mut x = Vect::zeros(n);
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l.m[k][i] * x[k];
            }
            x[i] = s / self.l.m[i][i];
        }
        x
    }

    pub fn inverse(&self) -> Mat {
        let n = self.l.n;
        let mut inv = Mat::zeros(n);
        for j in 0..n {
            let mut e = Vect::zeros(n);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv.m[i][j] = col[i];
            }
        }
        inv.symmetrized()
    }

    /// `L^{-1} A L^{-T}` for symmetric `A`, whose eigenvalues are those of `(LL^T)^{-1} A`.
    pub fn congruence(&self, a: &Mat) -> Mat {
        let n = self.l.n;
        // forward-substitute each column of A, then each row of the result
        let mut y = Mat::zeros(n);
        for j in 0..n {
            for i in 0..n {
                let mut s = a.m[i][j];
                for k in 0..i {
                    s -= self.l.m[i][k] * y.m[k][j];
                }
                y.m[i][j] = s / self.l.m[i][i];
            }
        }
        let mut z = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = y.m[i][j];
                for k in 0..j {
                    s -= self.l.m[j][k] * z.m[i][k];
                }
                z.m[i][j] = s / self.l.m[j][j];
            }
        }
        z.symmetrized()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_inverse_roundtrip() {
        let a = Mat::from_fn(3, |i, j| if i == j { 4.0 } else { 1.0 / (1.0 + (i + j) as f64) });
        let ch = a.cholesky().unwrap();
        let prod = a.mul(&ch.inverse());
        assert!(prod.sub(&Mat::identity(3)).max_abs() < 1e-14);
        let l = ch.factor();
        assert!(l.mul(&l.transpose()).sub(&a).max_abs() < 1e-14);
    }

    #[test]
    fn singular_and_ill_conditioned_rejected() {
        assert!(Mat::diag(&[1.0, 0.0]).cholesky().is_err());
        assert!(Mat::diag(&[1.0, -1.0]).cholesky().is_err());
        assert!(Mat::diag(&[1.0, 1e-13]).cholesky().is_err());
        assert!(Mat::diag(&[1.0, 1e-11]).cholesky().is_ok());
    }

    #[test]
    fn congruence_eigenvalues_match_generalized_problem() {
        let g = Mat::diag(&[4.0, 9.0]);
        let h = Mat::diag(&[2.0, 3.0]);
        let ev = g.cholesky().unwrap().congruence(&h).symmetric_eigenvalues();
        assert!((ev[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((ev[1] - 0.5).abs() < 1e-14);
    }
}
