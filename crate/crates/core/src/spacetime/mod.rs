//! Ambient Lorentzian manifolds `e^{2 psi} (-(dx0)^2 + sigma_ij dx^i dx^j)` over a flat torus.

mod curvature;
mod models;
mod reparam;

pub use curvature::{ricci_contraction_fd, ricci_tensor_fd};
pub use models::{
    make_exp_rw, make_minkowski_slab, make_sads_interior, make_sads_interior_with, make_sads_region,
    make_warped_rw, sads_f_tilde, sads_horizon, SadsParams,
};
pub use reparam::{reparameterize, reparameterize_until, Phi};
pub(crate) use reparam::spatial_probes;

use crate::error::{ImcfError, Result};
use crate::linalg::{Mat, Vect};
use std::fmt;
use std::sync::Arc;

/// Analytic metric data of a conformal-product spacetime.
///
/// `x` holds the `d` spatial coordinates; implementations must be pure.
pub trait ConformalMetric: Send + Sync {
    fn psi(&self, x0: f64, x: &[f64]) -> f64;
    /// `(d psi / d x0, d psi / d x^i)`.
    fn dpsi(&self, x0: f64, x: &[f64]) -> (f64, Vect);
    fn sigma(&self, x0: f64, x: &[f64]) -> Mat;
    fn dsigma0(&self, x0: f64, x: &[f64]) -> Mat;
    /// `d sigma_ij / d x^k`.
    fn dsigmak(&self, x0: f64, x: &[f64], k: usize) -> Mat;
    /// Closed-form `Ric(nu, nu)`; `None` selects the finite-difference fallback.
    fn ricci_nu_nu(&self, _x0: f64, _x: &[f64], _nu: &Vect) -> Option<f64> {
        None
    }
}

/// A spacetime model: metric callables plus domain metadata.
#[derive(Clone)]
pub struct SpacetimeModel {
    name: String,
    descriptor: String,
    dim: usize,
    x0_range: (f64, f64),
    periods: Vec<f64>,
    sample_window: (f64, f64),
    length_scale: f64,
    metric: Arc<dyn ConformalMetric>,
}

impl fmt::Debug for SpacetimeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpacetimeModel")
            .field("descriptor", &self.descriptor)
            .field("x0_range", &self.x0_range)
            .field("periods", &self.periods)
            .finish()
    }
}

impl SpacetimeModel {
    /// `sample_window` is a finite sub-interval of `x0_range` used for random sampling.
    pub fn new(
        name: impl Into<String>,
        descriptor: impl Into<String>,
        x0_range: (f64, f64),
        periods: Vec<f64>,
        sample_window: (f64, f64),
        length_scale: f64,
        metric: Arc<dyn ConformalMetric>,
    ) -> Result<Self> {
        let dim = periods.len();
        if dim == 0 || dim > 3 {
            return Err(ImcfError::Precondition(format!("spatial dimension {dim} not in 1..=3")));
        }
        if periods.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(ImcfError::Precondition("periods must be positive and finite".into()));
        }
        if !(x0_range.0 < x0_range.1) {
            return Err(ImcfError::Precondition(format!("empty time range {x0_range:?}")));
        }
        if !(sample_window.0.is_finite()
            && sample_window.1.is_finite()
            && sample_window.0 < sample_window.1
            && sample_window.0 >= x0_range.0
            && sample_window.1 <= x0_range.1)
        {
            return Err(ImcfError::Precondition(format!(
                "sample window {sample_window:?} not a finite subset of {x0_range:?}"
            )));
        }
        Ok(SpacetimeModel {
            name: name.into(),
            descriptor: descriptor.into(),
            dim,
            x0_range,
            periods,
            sample_window,
            length_scale,
            metric,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Name plus parameters, stable across runs; used for hashing.
    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    /// Spatial dimension `d` of the Cauchy hypersurface.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x0_range(&self) -> (f64, f64) {
        self.x0_range
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn sample_window(&self) -> (f64, f64) {
        self.sample_window
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn with_sample_window(mut self, window: (f64, f64)) -> Result<Self> {
        if !(window.0 < window.1 && window.0 >= self.x0_range.0 && window.1 <= self.x0_range.1) {
            return Err(ImcfError::Precondition(format!("sample window {window:?} outside range")));
        }
        self.sample_window = window;
        Ok(self)
    }

    pub fn in_domain(&self, x0: f64) -> bool {
        x0 > self.x0_range.0 && x0 < self.x0_range.1
    }

    pub fn check_x0(&self, x0: f64) -> Result<()> {
        if self.in_domain(x0) {
            Ok(())
        } else {
            Err(ImcfError::Domain(format!(
                "x0 = {x0} outside ({}, {}) of {}",
                self.x0_range.0, self.x0_range.1, self.name
            )))
        }
    }

    pub fn psi(&self, x0: f64, x: &[f64]) -> f64 {
        self.metric.psi(x0, x)
    }

    pub fn dpsi(&self, x0: f64, x: &[f64]) -> (f64, Vect) {
        self.metric.dpsi(x0, x)
    }

    pub fn sigma(&self, x0: f64, x: &[f64]) -> Mat {
        self.metric.sigma(x0, x)
    }

    pub fn dsigma0(&self, x0: f64, x: &[f64]) -> Mat {
        self.metric.dsigma0(x0, x)
    }

    pub fn dsigmak(&self, x0: f64, x: &[f64], k: usize) -> Mat {
        self.metric.dsigmak(x0, x, k)
    }

    pub fn ricci_closed_form(&self, x0: f64, x: &[f64], nu: &Vect) -> Option<f64> {
        self.metric.ricci_nu_nu(x0, x, nu)
    }

    /// Full spacetime metric `g_ab`, indices ordered `(x0, x^1, .., x^d)`.
    pub fn metric_tensor(&self, x0: f64, x: &[f64]) -> Mat {
        let e2 = (2.0 * self.psi(x0, x)).exp();
        let s = self.sigma(x0, x);
        let mut g = Mat::zeros(self.dim + 1);
        g[(0, 0)] = -e2;
        for i in 0..self.dim {
            for j in 0..self.dim {
                g[(i + 1, j + 1)] = e2 * s[(i, j)];
            }
        }
        g
    }

    /// `g(v, v)` for a contravariant spacetime vector.
    pub fn lorentz_norm2(&self, x0: f64, x: &[f64], v: &Vect) -> f64 {
        self.metric_tensor(x0, x).bilinear(v, v)
    }

    pub(crate) fn metric_arc(&self) -> Arc<dyn ConformalMetric> {
        self.metric.clone()
    }
}

/// Time-index Christoffel symbols of the ambient metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChristoffelTime {
    /// `Gamma^0_00`
    pub g000: f64,
    /// `Gamma^0_0i`
    pub g00i: Vect,
    /// `Gamma^0_ij`
    pub g0ij: Mat,
}

/// Extrinsic geometry of the coordinate slice `{x0 = const}` w.r.t. the past-directed normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceGeometry {
    pub hbar: Mat,
    pub hbar_trace: f64,
    /// `e^psi`
    pub conf: f64,
}

pub fn christoffel_time(model: &SpacetimeModel, x0: f64, x: &[f64]) -> Result<ChristoffelTime> {
    model.check_x0(x0)?;
    let (psi0, dpsi) = model.dpsi(x0, x);
    let s = model.sigma(x0, x);
    let ds0 = model.dsigma0(x0, x);
    Ok(ChristoffelTime {
        g000: psi0,
        g00i: dpsi,
        g0ij: ds0.scaled(0.5).add(&s.scaled(psi0)),
    })
}

pub fn slice_geometry(model: &SpacetimeModel, x0: f64, x: &[f64]) -> Result<SliceGeometry> {
    model.check_x0(x0)?;
    let psi = model.psi(x0, x);
    let (psi0, _) = model.dpsi(x0, x);
    let s = model.sigma(x0, x);
    let ds0 = model.dsigma0(x0, x);
    let sinv = s.cholesky()?.inverse();
    let conf = psi.exp();
    // e^{-psi} hbar = -1/2 sigma' - psi' sigma
    let reduced = ds0.scaled(-0.5).sub(&s.scaled(psi0));
    let hbar = reduced.scaled(conf);
    let hbar_trace = sinv.contract(&reduced) / conf;
    Ok(SliceGeometry { hbar, hbar_trace, conf })
}

/// `Ric(nu, nu)` at `(x0, x)`: closed form when the model has one, else finite differences.
pub fn ambient_ricci_contraction(model: &SpacetimeModel, x0: f64, x: &[f64], nu: &Vect) -> Result<f64> {
    model.check_x0(x0)?;
    if nu.len() != model.dim() + 1 {
        return Err(ImcfError::Precondition(format!(
            "vector has {} components, expected {}",
            nu.len(),
            model.dim() + 1
        )));
    }
    let n2 = model.lorentz_norm2(x0, x, nu);
    if !(n2 < 0.0) {
        return Err(ImcfError::NotTimelike(n2));
    }
    match model.ricci_closed_form(x0, x, nu) {
        Some(v) => Ok(v),
        None => ricci_contraction_fd(model, x0, x, nu),
    }
}

/// Norm of `eta` in the Riemannian reference metric `e^{2 psi}((dx0)^2 + sigma)`.
pub fn reference_norm(model: &SpacetimeModel, x0: f64, x: &[f64], eta: &Vect) -> Result<f64> {
    model.check_x0(x0)?;
    let d = model.dim();
    if eta.len() != d + 1 {
        return Err(ImcfError::Precondition(format!("vector has {} components, expected {}", eta.len(), d + 1)));
    }
    let s = model.sigma(x0, x);
    let spatial = Vect::from_slice(&eta.as_slice()[1..]);
    let q = eta[0] * eta[0] + s.bilinear(&spatial, &spatial);
    Ok(model.psi(x0, x).exp() * q.sqrt())
}

/// Future-directed unit timelike vector with coordinate velocity `w` (requires `sigma(w, w) < 1`).
pub fn unit_timelike(model: &SpacetimeModel, x0: f64, x: &[f64], w: &Vect) -> Result<Vect> {
    let s = model.sigma(x0, x);
    let w2 = s.bilinear(w, w);
    if !(w2 < 1.0) {
        return Err(ImcfError::NotTimelike(w2 - 1.0));
    }
    let a = (-model.psi(x0, x)).exp() / (1.0 - w2).sqrt();
    let mut nu = Vect::zeros(model.dim() + 1);
    nu[0] = a;
    for i in 0..model.dim() {
        nu[i + 1] = a * w[i];
    }
    Ok(nu)
}

#[cfg(test)]
mod tests;
