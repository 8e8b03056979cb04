//! Built-in analytic spacetimes.

use super::{ConformalMetric, SpacetimeModel};
use crate::error::{ImcfError, Result};
use crate::linalg::{Mat, Vect};
use std::f64::consts::TAU;
use std::sync::Arc;

/// Flat space: `psi = 0`, `sigma = delta`.
struct Flat {
    d: usize,
}

impl ConformalMetric for Flat {
    fn psi(&self, _x0: f64, _x: &[f64]) -> f64 {
        0.0
    }
    fn dpsi(&self, _x0: f64, _x: &[f64]) -> (f64, Vect) {
        (0.0, Vect::zeros(self.d))
    }
    fn sigma(&self, _x0: f64, _x: &[f64]) -> Mat {
        Mat::identity(self.d)
    }
    fn dsigma0(&self, _x0: f64, _x: &[f64]) -> Mat {
        Mat::zeros(self.d)
    }
    fn dsigmak(&self, _x0: f64, _x: &[f64], _k: usize) -> Mat {
        Mat::zeros(self.d)
    }
    fn ricci_nu_nu(&self, _x0: f64, _x: &[f64], _nu: &Vect) -> Option<f64> {
        Some(0.0)
    }
}

/// Minkowski space restricted to the slab `x0_min < x0 < x0_max` over a flat torus.
pub fn make_minkowski_slab(d: usize, x0_min: f64, x0_max: f64, periods: Option<Vec<f64>>) -> Result<SpacetimeModel> {
    let periods = periods.unwrap_or_else(|| vec![TAU; d]);
    check_periods(d, &periods)?;
    if !(x0_min.is_finite() && x0_max.is_finite()) {
        return Err(ImcfError::Precondition("slab bounds must be finite".into()));
    }
    SpacetimeModel::new(
        "minkowski_slab",
        format!("minkowski_slab(d={d},x0=({x0_min},{x0_max}),periods={periods:?})"),
        (x0_min, x0_max),
        periods,
        (x0_min, x0_max),
        1.0,
        Arc::new(Flat { d }),
    )
}

/// Exponentially contracting Robertson-Walker model: `psi = -lambda x0`, `sigma = delta`.
///
/// Slices have `e^psi Hbar = d lambda`; the future end `x0 -> inf` lies at finite proper time.
struct ExpRw {
    lambda: f64,
    d: usize,
}

impl ConformalMetric for ExpRw {
    fn psi(&self, x0: f64, _x: &[f64]) -> f64 {
        -self.lambda * x0
    }
    fn dpsi(&self, _x0: f64, _x: &[f64]) -> (f64, Vect) {
        (-self.lambda, Vect::zeros(self.d))
    }
    fn sigma(&self, _x0: f64, _x: &[f64]) -> Mat {
        Mat::identity(self.d)
    }
    fn dsigma0(&self, _x0: f64, _x: &[f64]) -> Mat {
        Mat::zeros(self.d)
    }
    fn dsigmak(&self, _x0: f64, _x: &[f64], _k: usize) -> Mat {
        Mat::zeros(self.d)
    }
    fn ricci_nu_nu(&self, _x0: f64, _x: &[f64], nu: &Vect) -> Option<f64> {
        // conformally flat with linear psi: Ric_ab = (d-1) lambda^2 (delta_a^0 delta_b^0 + eta_ab)
        let spatial: f64 = (1..=self.d).map(|i| nu[i] * nu[i]).sum();
        Some((self.d as f64 - 1.0) * self.lambda * self.lambda * spatial)
    }
}

pub fn make_exp_rw(lambda: f64, d: usize, periods: Option<Vec<f64>>) -> Result<SpacetimeModel> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ImcfError::Precondition(format!("lambda = {lambda} must be positive")));
    }
    let periods = periods.unwrap_or_else(|| vec![TAU; d]);
    check_periods(d, &periods)?;
    SpacetimeModel::new(
        "exp_rw",
        format!("exp_rw(lambda={lambda},d={d},periods={periods:?})"),
        (f64::NEG_INFINITY, f64::INFINITY),
        periods,
        (-2.0 / lambda, 8.0 / lambda),
        // e-folding length of the metric components e^{-2 lambda x0}
        0.5 / lambda,
        Arc::new(ExpRw { lambda, d }),
    )
}

/// Spatially inhomogeneous variant of [`ExpRw`] with no closed-form curvature:
/// `psi = -lambda x0 + eps sin(k x^1)`, `sigma = (1 + eps cos(k x^1) / (1 + x0^2)) delta`.
struct WarpedRw {
    lambda: f64,
    eps: f64,
    d: usize,
    k: f64,
}

impl WarpedRw {
    fn s(&self, x0: f64, x: &[f64]) -> f64 {
        1.0 + self.eps * (self.k * x[0]).cos() / (1.0 + x0 * x0)
    }
}

impl ConformalMetric for WarpedRw {
    fn psi(&self, x0: f64, x: &[f64]) -> f64 {
        -self.lambda * x0 + self.eps * (self.k * x[0]).sin()
    }
    fn dpsi(&self, _x0: f64, x: &[f64]) -> (f64, Vect) {
        let mut g = Vect::zeros(self.d);
        g[0] = self.eps * self.k * (self.k * x[0]).cos();
        (-self.lambda, g)
    }
    fn sigma(&self, x0: f64, x: &[f64]) -> Mat {
        Mat::identity(self.d).scaled(self.s(x0, x))
    }
    fn dsigma0(&self, x0: f64, x: &[f64]) -> Mat {
        let q = 1.0 + x0 * x0;
        let ds = -self.eps * (self.k * x[0]).cos() * 2.0 * x0 / (q * q);
        Mat::identity(self.d).scaled(ds)
    }
    fn dsigmak(&self, x0: f64, x: &[f64], k: usize) -> Mat {
        if k != 0 {
            return Mat::zeros(self.d);
        }
        let ds = -self.eps * self.k * (self.k * x[0]).sin() / (1.0 + x0 * x0);
        Mat::identity(self.d).scaled(ds)
    }
}

pub fn make_warped_rw(lambda: f64, eps: f64, d: usize, periods: Option<Vec<f64>>) -> Result<SpacetimeModel> {
    if !(lambda > 0.0) || !(eps.abs() < 0.5) {
        return Err(ImcfError::Precondition(format!(
            "warped_rw needs lambda > 0 and |eps| < 0.5 (got {lambda}, {eps})"
        )));
    }
    let periods = periods.unwrap_or_else(|| vec![TAU; d]);
    check_periods(d, &periods)?;
    let k = TAU / periods[0];
    SpacetimeModel::new(
        "warped_rw",
        format!("warped_rw(lambda={lambda},eps={eps},d={d},periods={periods:?})"),
        (f64::NEG_INFINITY, f64::INFINITY),
        periods,
        (-2.0 / lambda, 8.0 / lambda),
        0.5 / lambda,
        Arc::new(WarpedRw { lambda, eps, d, k }),
    )
}

/// Parameters of the Schwarzschild-AdS black-hole interior.
#[derive(Debug, Clone, PartialEq)]
pub struct SadsParams {
    pub n: usize,
    pub lambda: f64,
    pub m: f64,
    pub kappa: i32,
    /// Distance kept from the horizon and from the singularity.
    pub epsilon: f64,
    /// Periods of the compactified Killing circle and of the angular circle.
    pub periods: Option<Vec<f64>>,
}

impl SadsParams {
    pub fn new(n: usize, lambda: f64, m: f64, kappa: i32) -> Self {
        SadsParams { n, lambda, m, kappa, epsilon: 1e-3, periods: None }
    }
}

/// `-f(r)` for the S-AdS lapse `f = kappa - 2 Lambda r^2 / (n (n+1)) - m r^{-(n-1)}`.
pub fn sads_f_tilde(n: usize, lambda: f64, m: f64, kappa: i32, r: f64) -> f64 {
    let nf = n as f64;
    -(kappa as f64) + 2.0 * lambda * r * r / (nf * (nf + 1.0)) + m * r.powi(-(n as i32 - 1))
}

fn sads_f_tilde_r(n: usize, lambda: f64, m: f64, r: f64) -> f64 {
    let nf = n as f64;
    4.0 * lambda * r / (nf * (nf + 1.0)) - (nf - 1.0) * m * r.powi(-(n as i32))
}

/// Smallest positive root `r0` of `f`, with `f < 0` on `(0, r0)`.
pub fn sads_horizon(n: usize, lambda: f64, m: f64, kappa: i32) -> Result<f64> {
    let ft = |r: f64| sads_f_tilde(n, lambda, m, kappa, r);
    let mut lo = 1e-9;
    if !(ft(lo) > 0.0) {
        return Err(ImcfError::NoHorizon("f is not negative near r = 0".into()));
    }
    let mut hi = lo;
    while ft(hi) > 0.0 {
        lo = hi;
        hi *= 1.1;
        if hi > 1e9 {
            return Err(ImcfError::NoHorizon("f has no positive root".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ft(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Interior region written with the future-directed time `x0 = r_top - r`:
/// `e^{2 psi}(-(dx0)^2 + ft^2 dt^2 + ft r^2 dtheta^2)`, `psi = -1/2 log ft`.
struct SadsMetric {
    n: usize,
    lambda: f64,
    m: f64,
    kappa: i32,
    r_top: f64,
}

impl SadsMetric {
    fn parts(&self, x0: f64) -> (f64, f64, f64) {
        let r = self.r_top - x0;
        let ft = sads_f_tilde(self.n, self.lambda, self.m, self.kappa, r);
        (r, ft, sads_f_tilde_r(self.n, self.lambda, self.m, r))
    }
}

impl ConformalMetric for SadsMetric {
    fn psi(&self, x0: f64, _x: &[f64]) -> f64 {
        let (_, ft, _) = self.parts(x0);
        -0.5 * ft.ln()
    }
    fn dpsi(&self, x0: f64, _x: &[f64]) -> (f64, Vect) {
        let (_, ft, ftr) = self.parts(x0);
        // d/dx0 = -d/dr
        (0.5 * ftr / ft, Vect::zeros(2))
    }
    fn sigma(&self, x0: f64, _x: &[f64]) -> Mat {
        let (r, ft, _) = self.parts(x0);
        Mat::diag(&[ft * ft, ft * r * r])
    }
    fn dsigma0(&self, x0: f64, _x: &[f64]) -> Mat {
        let (r, ft, ftr) = self.parts(x0);
        Mat::diag(&[-2.0 * ft * ftr, -(ftr * r * r + 2.0 * ft * r)])
    }
    fn dsigmak(&self, _x0: f64, _x: &[f64], _k: usize) -> Mat {
        Mat::zeros(2)
    }
    fn ricci_nu_nu(&self, x0: f64, x: &[f64], nu: &Vect) -> Option<f64> {
        // Einstein: Ric = (2/n) Lambda g
        let e2 = (2.0 * self.psi(x0, x)).exp();
        let s = self.sigma(x0, x);
        let mut g = -nu[0] * nu[0];
        for i in 0..2 {
            for j in 0..2 {
                g += s[(i, j)] * nu[i + 1] * nu[j + 1];
            }
        }
        Some(2.0 / self.n as f64 * self.lambda * e2 * g)
    }
}

/// S-AdS-form metric on the coordinate band `x0 = r_top - r in x0_range`, without
/// requiring a horizon. Only `n = 1` (spatial section `T^2`) is supported.
pub fn make_sads_region(
    n: usize,
    lambda: f64,
    m: f64,
    kappa: i32,
    r_top: f64,
    x0_range: (f64, f64),
    periods: Option<Vec<f64>>,
) -> Result<SpacetimeModel> {
    check_sads_inputs(n, m, kappa)?;
    let (a, b) = x0_range;
    if !(a.is_finite() && b.is_finite() && a < b && b < r_top) {
        return Err(ImcfError::Precondition(format!("bad band {x0_range:?} for r_top = {r_top}")));
    }
    for k in 0..=256 {
        let x0 = a + (b - a) * k as f64 / 256.0;
        if !(sads_f_tilde(n, lambda, m, kappa, r_top - x0) > 0.0) {
            return Err(ImcfError::Precondition(format!("f >= 0 at r = {} inside the band", r_top - x0)));
        }
    }
    let periods = periods.unwrap_or_else(|| vec![TAU, TAU]);
    check_periods(n + 1, &periods)?;
    SpacetimeModel::new(
        "sads_interior",
        format!("sads(n={n},Lambda={lambda},m={m},kappa={kappa},r_top={r_top},x0=({a},{b}),periods={periods:?})"),
        x0_range,
        periods,
        x0_range,
        r_top,
        Arc::new(SadsMetric { n, lambda, m, kappa, r_top }),
    )
}

pub fn make_sads_interior(n: usize, lambda: f64, m: f64, kappa: i32) -> Result<SpacetimeModel> {
    make_sads_interior_with(&SadsParams::new(n, lambda, m, kappa))
}

/// Black-hole interior `{f < 0}` with time running from the horizon (`x0 = 0`)
/// toward the singularity (`x0 = r0`).
pub fn make_sads_interior_with(p: &SadsParams) -> Result<SpacetimeModel> {
    check_sads_inputs(p.n, p.m, p.kappa)?;
    let r0 = sads_horizon(p.n, p.lambda, p.m, p.kappa)?;
    let eps = p.epsilon;
    if !(eps > 0.0 && 2.0 * eps < r0) {
        return Err(ImcfError::Precondition(format!("epsilon {eps} too large for horizon r0 = {r0}")));
    }
    make_sads_region(p.n, p.lambda, p.m, p.kappa, r0, (eps, r0 - eps), p.periods.clone())
}

fn check_sads_inputs(n: usize, m: f64, kappa: i32) -> Result<()> {
    if n == 0 {
        return Err(ImcfError::Precondition("n must be at least 1".into()));
    }
    if n > 1 {
        return Err(ImcfError::UnsupportedTopology(format!(
            "n = {n}: the sphere factor S^{n} has no global periodic chart"
        )));
    }
    if !(m > 0.0) {
        return Err(ImcfError::Precondition(format!("m = {m} must be positive")));
    }
    if ![-1, 0, 1].contains(&kappa) {
        return Err(ImcfError::Precondition(format!("kappa = {kappa} not in {{-1, 0, 1}}")));
    }
    Ok(())
}

fn check_periods(d: usize, periods: &[f64]) -> Result<()> {
    if periods.len() != d {
        return Err(ImcfError::Precondition(format!("{} periods given for dimension {d}", periods.len())));
    }
    Ok(())
}
