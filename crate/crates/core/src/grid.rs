//! Periodic structured grids and finite-difference calculus on them.
//!
//! Points are stored row-major with the last axis fastest. Every stencil wraps
//! modulo the grid shape, so there are no ghost cells.

use crate::error::{ImcfError, Result};
use crate::linalg::{Mat, Vect, MAX_DIM};
use crate::par;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Smallest number of points per axis accepted by [`PeriodicGrid::new`].
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    shape: Vec<usize>,
    periods: Vec<f64>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
}

impl PeriodicGrid {
    pub fn new(shape: &[usize], periods: &[f64]) -> Result<Self> {
        let d = shape.len();
        if d == 0 || d > MAX_DIM - 1 {
            return Err(ImcfError::InvalidGrid(format!("dimension {d} not in 1..=3")));
        }
        if periods.len() != d {
            return Err(ImcfError::InvalidGrid(format!("{} periods for {d} axes", periods.len())));
        }
        if let Some(n) = shape.iter().find(|&&n| n < MIN_POINTS) {
            return Err(ImcfError::InvalidGrid(format!("axis with {n} points, need at least {MIN_POINTS}")));
        }
        if let Some(l) = periods.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(ImcfError::InvalidGrid(format!("period {l} must be positive and finite")));
        }
        let mut strides = vec![1; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        Ok(Self {
            shape: shape.to_vec(),
            periods: periods.to_vec(),
            spacing: shape.iter().zip(periods).map(|(&n, &l)| l / n as f64).collect(),
            strides,
            len: shape.iter().product(),
        })
    }

    /// `n^d` points on `[0, 2 pi)^d`.
    pub fn uniform(d: usize, n: usize) -> Result<Self> {
        Self::new(&vec![n; d], &vec![std::f64::consts::TAU; d])
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn h_min(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn multi_index(&self, p: usize) -> [usize; MAX_DIM] {
        let mut m = [0; MAX_DIM];
        for a in 0..self.dim() {
            m[a] = (p / self.strides[a]) % self.shape[a];
        }
        m
    }

    pub fn flat_index(&self, m: &[usize]) -> usize {
        m.iter()
            .zip(&self.shape)
            .zip(&self.strides)
            .map(|((&i, &n), &s)| (i % n) * s)
            .sum()
    }

    /// Coordinates of point `p`.
    pub fn point(&self, p: usize) -> Vec<f64> {
        let m = self.multi_index(p);
        (0..self.dim()).map(|a| m[a] as f64 * self.spacing[a]).collect()
    }

    /// Index of the point `offset` steps from `p` along `axis`, wrapping.
    pub fn neighbor(&self, p: usize, axis: usize, offset: isize) -> usize {
        let n = self.shape[axis] as isize;
        let i = ((p / self.strides[axis]) % self.shape[axis]) as isize;
        let j = (i + offset).rem_euclid(n);
        (p as isize + (j - i) * self.strides[axis] as isize) as usize
    }

    fn shift2(&self, p: usize, a: usize, oa: isize, b: usize, ob: isize) -> usize {
        self.neighbor(self.neighbor(p, a, oa), b, ob)
    }
}

/// Finite-difference accuracy order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FdOrder {
    #[default]
    Second,
    Fourth,
}

impl FdOrder {
    pub fn from_int(k: u32) -> Result<Self> {
        match k {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            _ => Err(ImcfError::Precondition(format!("finite-difference order {k} not in {{2, 4}}"))),
        }
    }

    pub fn as_int(self) -> u32 {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
        }
    }

    /// First-derivative weights at offsets `1..=k`; antisymmetric about 0.
    fn first(self) -> &'static [f64] {
        match self {
            Self::Second => &[0.5],
            Self::Fourth => &[2.0 / 3.0, -1.0 / 12.0],
        }
    }

    /// Second-derivative weights on `f(+k) + f(-k) - 2 f(0)` for offsets `1..=k`.
    fn second(self) -> &'static [f64] {
        match self {
            Self::Second => &[1.0],
            Self::Fourth => &[4.0 / 3.0, -1.0 / 12.0],
        }
    }
}

macro_rules! field_common {
    ($t:ident, $width:expr) => {
        impl $t {
            /// Wraps `data`; fails if its length does not match the grid.
            pub fn new(grid: Arc<PeriodicGrid>, data: Vec<f64>) -> Result<Self> {
                let w = $width(grid.dim());
                if data.len() != grid.len() * w {
                    return Err(ImcfError::InvalidGrid(format!(
                        "{} values for {} points of width {w}",
                        data.len(),
                        grid.len()
                    )));
                }
                Ok(Self { grid, data })
            }

            pub fn zeros(grid: Arc<PeriodicGrid>) -> Self {
                let n = grid.len() * $width(grid.dim());
                Self { grid, data: vec![0.0; n] }
            }

            pub fn grid(&self) -> &Arc<PeriodicGrid> {
                &self.grid
            }

            pub fn values(&self) -> &[f64] {
                &self.data
            }

            pub fn values_mut(&mut self) -> &mut [f64] {
                &mut self.data
            }

            pub fn into_values(self) -> Vec<f64> {
                self.data
            }

            pub fn is_finite(&self) -> bool {
                self.data.iter().all(|v| v.is_finite())
            }

            pub fn max_abs(&self) -> f64 {
                self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Arc<PeriodicGrid>,
    data: Vec<f64>,
}

field_common!(ScalarField, |_d: usize| 1);

impl ScalarField {
    pub fn from_fn(grid: Arc<PeriodicGrid>, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> Self {
        let data = par::map(grid.len(), |p| f(&grid.point(p)));
        Self { grid, data }
    }

    pub fn constant(grid: Arc<PeriodicGrid>, c: f64) -> Self {
        let data = vec![c; grid.len()];
        Self { grid, data }
    }

    pub fn get(&self, p: usize) -> f64 {
        self.data[p]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest value and the index where it occurs first.
    pub fn argmin(&self) -> (usize, f64) {
        self.data
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best })
    }

    /// Largest value and the index where it occurs first.
    pub fn argmax(&self) -> (usize, f64) {
        self.data
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> Self {
        let data = par::map(self.data.len(), |p| f(self.data[p]));
        Self { grid: self.grid.clone(), data }
    }
}

/// One `d`-vector per point, stored at `data[p * d + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Arc<PeriodicGrid>,
    data: Vec<f64>,
}

field_common!(VectorField, |d: usize| d);

impl VectorField {
    pub fn get(&self, p: usize) -> Vect {
        let d = self.grid.dim();
        Vect::from_slice(&self.data[p * d..(p + 1) * d])
    }

    pub fn component(&self, p: usize, i: usize) -> f64 {
        self.data[p * self.grid.dim() + i]
    }
}

/// One symmetric `d x d` matrix per point, stored at `data[p * d * d + i * d + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrixField {
    grid: Arc<PeriodicGrid>,
    data: Vec<f64>,
}

field_common!(SymMatrixField, |d: usize| d * d);

impl SymMatrixField {
    pub fn get(&self, p: usize) -> Mat {
        let d = self.grid.dim();
        let base = p * d * d;
        Mat::from_fn(d, |i, j| self.data[base + i * d + j])
    }

    pub fn component(&self, p: usize, i: usize, j: usize) -> f64 {
        let d = self.grid.dim();
        self.data[p * d * d + i * d + j]
    }

    pub fn from_mats(grid: Arc<PeriodicGrid>, mats: &[Mat]) -> Result<Self> {
        let d = grid.dim();
        let mut data = Vec::with_capacity(mats.len() * d * d);
        for m in mats {
            for i in 0..d {
                for j in 0..d {
                    data.push(m[(i, j)]);
                }
            }
        }
        Self::new(grid, data)
    }
}

/// Derivative along `axis` of component `c` of a field with `width` values per point.
fn diff1(grid: &PeriodicGrid, data: &[f64], width: usize, c: usize, p: usize, axis: usize, order: FdOrder) -> f64 {
    let mut s = 0.0;
    for (k, w) in order.first().iter().enumerate() {
        let o = k as isize + 1;
        s += w * (data[grid.neighbor(p, axis, o) * width + c] - data[grid.neighbor(p, axis, -o) * width + c]);
    }
    s / grid.spacing[axis]
}

fn diff2(grid: &PeriodicGrid, data: &[f64], p: usize, axis: usize, order: FdOrder) -> f64 {
    let centre = 2.0 * data[p];
    let mut s = 0.0;
    for (k, wk) in order.second().iter().enumerate() {
        let o = k as isize + 1;
        s += wk * (data[grid.neighbor(p, axis, o)] + data[grid.neighbor(p, axis, -o)] - centre);
    }
    s / (grid.spacing[axis] * grid.spacing[axis])
}

/// Mixed partial by nesting the first-derivative stencil along `a` and `b`.
fn diff_mixed(grid: &PeriodicGrid, data: &[f64], p: usize, a: usize, b: usize, order: FdOrder) -> f64 {
    let w = order.first();
    let mut s = 0.0;
    for (ka, wa) in w.iter().enumerate() {
        let oa = ka as isize + 1;
        for (kb, wb) in w.iter().enumerate() {
            let ob = kb as isize + 1;
            let corner = data[grid.shift2(p, a, oa, b, ob)] - data[grid.shift2(p, a, oa, b, -ob)]
                - data[grid.shift2(p, a, -oa, b, ob)]
                + data[grid.shift2(p, a, -oa, b, -ob)];
            s += wa * wb * corner;
        }
    }
    s / (grid.spacing[a] * grid.spacing[b])
}

/// Periodic central-difference gradient.
pub fn fd_gradient(f: &ScalarField, order: FdOrder) -> VectorField {
    let grid = f.grid.clone();
    let d = grid.dim();
    let mut out = vec![0.0; grid.len() * d];
    par::fill_chunks(&mut out, d, |p, chunk| {
        for (a, slot) in chunk.iter_mut().enumerate() {
            *slot = diff1(&grid, &f.data, 1, 0, p, a, order);
        }
    });
    VectorField { grid, data: out }
}

/// Jacobian `d_i V^k` of a vector field, returned as one matrix per point with `m[(k, i)]`.
pub fn fd_jacobian(v: &VectorField, order: FdOrder) -> Vec<Mat> {
    let grid = &v.grid;
    let d = grid.dim();
    par::map(grid.len(), |p| Mat::from_fn(d, |k, i| diff1(grid, &v.data, d, k, p, i, order)))
}

/// Periodic central-difference Hessian, exactly symmetric.
pub fn fd_hessian(f: &ScalarField, order: FdOrder) -> SymMatrixField {
    let grid = f.grid.clone();
    let d = grid.dim();
    let mut out = vec![0.0; grid.len() * d * d];
    par::fill_chunks(&mut out, d * d, |p, chunk| {
        for a in 0..d {
            chunk[a * d + a] = diff2(&grid, &f.data, p, a, order);
            for b in a + 1..d {
                let m = diff_mixed(&grid, &f.data, p, a, b, order);
                chunk[a * d + b] = m;
                chunk[b * d + a] = m;
            }
        }
    });
    SymMatrixField { grid, data: out }
}

/// Christoffel symbols of a metric field, stored at `data[p d^3 + k d^2 + i d + j]` for `Gamma^k_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffels {
    grid: Arc<PeriodicGrid>,
    data: Vec<f64>,
}

impl Christoffels {
    pub fn zeros(grid: Arc<PeriodicGrid>) -> Self {
        let d = grid.dim();
        let n = grid.len() * d * d * d;
        Self { grid, data: vec![0.0; n] }
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn get(&self, p: usize, k: usize, i: usize, j: usize) -> f64 {
        let d = self.grid.dim();
        self.data[((p * d + k) * d + i) * d + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)` with periodic finite differences.
pub fn metric_christoffels(g: &SymMatrixField, order: FdOrder) -> Result<Christoffels> {
    let grid = g.grid.clone();
    let d = grid.dim();
    let w = d * d;
    let inverses = par::try_map(grid.len(), |p| Ok::<_, ImcfError>(g.get(p).cholesky()?.inverse()))?;
    let mut out = vec![0.0; grid.len() * d * d * d];
    par::fill_chunks(&mut out, d * d * d, |p, chunk| {
        // dg[l][i][j] = d_l g_ij
        let mut dg = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
        for (l, dl) in dg.iter_mut().enumerate().take(d) {
            for i in 0..d {
                for j in i..d {
                    let v = diff1(&grid, &g.data, w, i * d + j, p, l, order);
                    dl[i][j] = v;
                    dl[j][i] = v;
                }
            }
        }
        let ginv = &inverses[p];
        for k in 0..d {
            for i in 0..d {
                for j in i..d {
                    let mut s = 0.0;
                    for l in 0..d {
                        s += ginv[(k, l)] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                    }
                    chunk[(k * d + i) * d + j] = 0.5 * s;
                    chunk[(k * d + j) * d + i] = 0.5 * s;
                }
            }
        }
    });
    Ok(Christoffels { grid, data: out })
}

pub(crate) fn covariant_hessian_from(hess: &SymMatrixField, grad: &VectorField, gamma: &Christoffels) -> SymMatrixField {
    let grid = hess.grid.clone();
    let d = grid.dim();
    let mut out = hess.data.clone();
    par::fill_chunks(&mut out, d * d, |p, chunk| {
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += gamma.get(p, k, i, j) * grad.component(p, k);
                }
                chunk[i * d + j] -= s;
            }
        }
    });
    SymMatrixField { grid, data: out }
}

/// `u_;ij = u_,ij - Gamma^k_ij u_k`.
pub fn covariant_hessian(u: &ScalarField, gamma: &Christoffels, order: FdOrder) -> SymMatrixField {
    covariant_hessian_from(&fd_hessian(u, order), &fd_gradient(u, order), gamma)
}

/// Laplace-Beltrami operator `g^{ij} f_;ij`.
pub fn laplace_beltrami(f: &ScalarField, ginv: &SymMatrixField, gamma: &Christoffels, order: FdOrder) -> ScalarField {
    let cov = covariant_hessian(f, gamma, order);
    let grid = f.grid.clone();
    let data = par::map(grid.len(), |p| ginv.get(p).contract(&cov.get(p)));
    ScalarField { grid, data }
}

/// Rectangle-rule integral `sum f * weight * cell volume`, summed in index order.
pub fn integrate(f: &ScalarField, weight: &ScalarField) -> Result<f64> {
    if f.grid != weight.grid {
        return Err(ImcfError::InvalidGrid("integrand and weight live on different grids".into()));
    }
    let s: f64 = f.data.iter().zip(&weight.data).map(|(a, b)| a * b).sum();
    Ok(s * f.grid.cell_volume())
}

/// Rectangle-rule integral of a single field.
pub fn integrate_field(f: &ScalarField) -> f64 {
    f.data.iter().sum::<f64>() * f.grid.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn line(n: usize) -> Arc<PeriodicGrid> {
        Arc::new(PeriodicGrid::uniform(1, n).unwrap())
    }

    fn max_err(a: &[f64], b: impl Fn(usize) -> f64) -> f64 {
        a.iter().enumerate().fold(0.0, |m, (i, v)| m.max((v - b(i)).abs()))
    }

    #[test]
    fn grid_validation() {
        assert!(PeriodicGrid::new(&[7], &[1.0]).is_err());
        assert!(PeriodicGrid::new(&[8, 8], &[1.0]).is_err());
        assert!(PeriodicGrid::new(&[8], &[0.0]).is_err());
        assert!(PeriodicGrid::new(&[], &[]).is_err());
        let g = PeriodicGrid::new(&[8, 10, 12], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g.len(), 960);
        assert_eq!(g.spacing(), &[0.125, 0.2, 0.25]);
    }

    #[test]
    fn indexing_wraps() {
        let g = PeriodicGrid::new(&[8, 10], &[1.0, 1.0]).unwrap();
        let p = g.flat_index(&[7, 9]);
        assert_eq!(p, 79);
        assert_eq!(g.neighbor(p, 0, 1), g.flat_index(&[0, 9]));
        assert_eq!(g.neighbor(p, 1, 2), g.flat_index(&[7, 1]));
        assert_eq!(g.neighbor(0, 1, -1), g.flat_index(&[0, 9]));
        for q in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(q)[..2]), q);
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let g = Arc::new(PeriodicGrid::new(&[8, 9, 10], &[1.0, 2.0, 3.0]).unwrap());
        let f = ScalarField::constant(g, 3.7);
        for order in [FdOrder::Second, FdOrder::Fourth] {
            assert_eq!(fd_gradient(&f, order).max_abs(), 0.0);
            assert_eq!(fd_hessian(&f, order).max_abs(), 0.0);
        }
    }

    #[test]
    fn gradient_of_sine_within_truncation_bound() {
        let f = ScalarField::from_fn(line(64), |x| x[0].sin());
        let grad = fd_gradient(&f, FdOrder::Second);
        let h = TAU / 64.0;
        let err = max_err(grad.values(), |p| (p as f64 * h).cos());
        assert!(err <= h * h / 6.0, "{err}");
    }

    #[test]
    fn observed_orders_match_nominal() {
        for (order, nominal) in [(FdOrder::Second, 4.0), (FdOrder::Fourth, 16.0)] {
            let err = |n: usize| {
                let f = ScalarField::from_fn(line(n), |x| x[0].sin());
                let h = TAU / n as f64;
                let g = max_err(fd_gradient(&f, order).values(), |p| (p as f64 * h).cos());
                let hh = max_err(fd_hessian(&f, order).values(), |p| -(p as f64 * h).sin());
                (g, hh)
            };
            let (g1, h1) = err(64);
            let (g2, h2) = err(128);
            assert!((g1 / g2 / nominal - 1.0).abs() < 0.1, "{order:?} gradient ratio {}", g1 / g2);
            assert!((h1 / h2 / nominal - 1.0).abs() < 0.1, "{order:?} hessian ratio {}", h1 / h2);
        }
    }

    #[test]
    fn jacobian_matches_gradients_of_components() {
        let g = Arc::new(PeriodicGrid::uniform(2, 16).unwrap());
        let a = ScalarField::from_fn(g.clone(), |x| x[0].sin() * x[1].cos());
        let b = ScalarField::from_fn(g.clone(), |x| (x[0] + 2.0 * x[1]).cos());
        let (ga, gb) = (fd_gradient(&a, FdOrder::Fourth), fd_gradient(&b, FdOrder::Fourth));
        let data = (0..g.len()).flat_map(|p| [a.get(p), b.get(p)]).collect();
        let jac = fd_jacobian(&VectorField::new(g.clone(), data).unwrap(), FdOrder::Fourth);
        for p in 0..g.len() {
            for i in 0..2 {
                assert_eq!(jac[p][(0, i)], ga.component(p, i));
                assert_eq!(jac[p][(1, i)], gb.component(p, i));
            }
        }
    }

    #[test]
    fn mixed_partials_converge_and_are_symmetric() {
        let g = Arc::new(PeriodicGrid::uniform(2, 64).unwrap());
        let f = ScalarField::from_fn(g.clone(), |x| x[0].sin() * x[1].cos());
        let hs = fd_hessian(&f, FdOrder::Second);
        let mut err: f64 = 0.0;
        for p in 0..g.len() {
            let x = g.point(p);
            let m = hs.get(p);
            assert_eq!(m[(0, 1)], m[(1, 0)]);
            err = err.max((m[(0, 1)] + x[0].cos() * x[1].sin()).abs());
        }
        let h = TAU / 64.0;
        assert!(err < h * h, "{err}");
    }

    #[test]
    fn flat_and_slice_constant_metrics_have_no_christoffels() {
        let g = Arc::new(PeriodicGrid::uniform(2, 16).unwrap());
        let id = SymMatrixField::from_mats(g.clone(), &vec![Mat::identity(2); g.len()]).unwrap();
        assert_eq!(metric_christoffels(&id, FdOrder::Second).unwrap().max_abs(), 0.0);
        let scaled = SymMatrixField::from_mats(g.clone(), &vec![Mat::identity(2).scaled((-2.0f64).exp()); g.len()]).unwrap();
        assert_eq!(metric_christoffels(&scaled, FdOrder::Fourth).unwrap().max_abs(), 0.0);
    }

    fn conformal_line(n: usize) -> SymMatrixField {
        let grid = line(n);
        let data = (0..n)
            .map(|p| {
                let x = grid.point(p)[0];
                (1.0 + 0.1 * x.sin()).powi(2)
            })
            .collect();
        SymMatrixField::new(grid, data).unwrap()
    }

    #[test]
    fn christoffel_of_conformal_line() {
        let errs: Vec<f64> = [64, 128]
            .iter()
            .map(|&n| {
                let g = conformal_line(n);
                let gamma = metric_christoffels(&g, FdOrder::Second).unwrap();
                let grid = g.grid().clone();
                (0..n).fold(0.0, |m: f64, p| {
                    let x = grid.point(p)[0];
                    let exact = 0.1 * x.cos() / (1.0 + 0.1 * x.sin());
                    m.max((gamma.get(p, 0, 0, 0) - exact).abs())
                })
            })
            .collect();
        assert!(errs[0] < 1e-3, "{errs:?}");
        assert!((errs[0] / errs[1] / 4.0 - 1.0).abs() < 0.15, "{errs:?}");
    }

    #[test]
    fn singular_metric_is_rejected() {
        let grid = line(8);
        let mut data = vec![1.0; 8];
        data[3] = 1e-14;
        let g = SymMatrixField::new(grid.clone(), data).unwrap();
        let gamma = metric_christoffels(&g, FdOrder::Second);
        assert!(gamma.is_ok(), "1-d metrics have trivially bounded condition");
        let m = Mat::from_fn(2, |i, j| if i == j { if i == 0 { 1.0 } else { 1e-13 } } else { 0.0 });
        let g2 = Arc::new(PeriodicGrid::uniform(2, 8).unwrap());
        let f = SymMatrixField::from_mats(g2.clone(), &vec![m; g2.len()]).unwrap();
        assert!(matches!(metric_christoffels(&f, FdOrder::Second), Err(ImcfError::SingularMetric(_))));
    }

    #[test]
    fn covariant_hessian_examples() {
        // flat: reduces to the partial Hessian
        let g = Arc::new(PeriodicGrid::uniform(2, 16).unwrap());
        let u = ScalarField::from_fn(g.clone(), |x| x[0].sin() + x[1].cos());
        let id = SymMatrixField::from_mats(g.clone(), &vec![Mat::identity(2); g.len()]).unwrap();
        let gamma = metric_christoffels(&id, FdOrder::Second).unwrap();
        assert_eq!(covariant_hessian(&u, &gamma, FdOrder::Second), fd_hessian(&u, FdOrder::Second));
        // constants vanish for any connection
        let gl = conformal_line(32);
        let gamma = metric_christoffels(&gl, FdOrder::Second).unwrap();
        let c = ScalarField::constant(gl.grid().clone(), 2.0);
        assert_eq!(covariant_hessian(&c, &gamma, FdOrder::Second).max_abs(), 0.0);
        // conformal line, u = sin x
        let mut errs = vec![];
        for n in [64, 128] {
            let gl = conformal_line(n);
            let grid = gl.grid().clone();
            let gamma = metric_christoffels(&gl, FdOrder::Second).unwrap();
            let u = ScalarField::from_fn(grid.clone(), |x| x[0].sin());
            let cov = covariant_hessian(&u, &gamma, FdOrder::Second);
            errs.push((0..n).fold(0.0f64, |m, p| {
                let x = grid.point(p)[0];
                let exact = -x.sin() - 0.1 * x.cos() / (1.0 + 0.1 * x.sin()) * x.cos();
                m.max((cov.values()[p] - exact).abs())
            }));
        }
        assert!(errs[0] < 2e-3 && errs[0] / errs[1] > 3.4, "{errs:?}");
    }

    #[test]
    fn laplace_beltrami_on_flat_torus() {
        let g = Arc::new(PeriodicGrid::uniform(2, 64).unwrap());
        let id = SymMatrixField::from_mats(g.clone(), &vec![Mat::identity(2); g.len()]).unwrap();
        let gamma = metric_christoffels(&id, FdOrder::Fourth).unwrap();
        let f = ScalarField::from_fn(g.clone(), |x| x[0].sin() * x[1].sin());
        let lap = laplace_beltrami(&f, &id, &gamma, FdOrder::Fourth);
        let err = max_err(lap.values(), |p| -2.0 * f.get(p));
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn quadrature_examples() {
        let grid = line(64);
        let one = ScalarField::constant(grid.clone(), 1.0);
        assert!((integrate(&one, &one).unwrap() - TAU).abs() < 1e-14);
        let s2 = ScalarField::from_fn(grid.clone(), |x| x[0].sin().powi(2));
        assert!((integrate(&s2, &one).unwrap() - PI).abs() < 1e-12);
        let zero = ScalarField::zeros(grid.clone());
        assert_eq!(integrate(&s2, &zero).unwrap(), 0.0);
        assert!(integrate(&s2, &ScalarField::constant(line(32), 1.0)).is_err());
        assert_eq!(integrate_field(&one), integrate(&one, &one).unwrap());
    }

    #[test]
    fn field_length_is_checked() {
        assert!(ScalarField::new(line(8), vec![0.0; 7]).is_err());
        let g = Arc::new(PeriodicGrid::uniform(2, 8).unwrap());
        assert!(VectorField::new(g.clone(), vec![0.0; 128]).is_ok());
        assert!(SymMatrixField::new(g, vec![0.0; 128]).is_err());
    }
}
