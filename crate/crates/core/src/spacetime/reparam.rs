//! Change of time function `x0 -> xt = int_{tau0}^{x0} phi`.
//!
//! The slices are unchanged, so the metric becomes
//! `e^{2 psi} phi^{-2} (-(dxt)^2 + phi^2 sigma)`: the conformal factor picks up
//! `phi^{-1}` and the spatial metric picks up `phi^2`.

use super::{slice_geometry, ConformalMetric, SpacetimeModel};
use crate::error::{ImcfError, Result};
use crate::linalg::{Mat, Vect};
use crate::numerics::{cumulative_simpson, MonotoneCubic};
use std::sync::Arc;

/// A positive rate function of the old time coordinate.
pub type Phi = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const QUADRATURE_NODES: usize = 4096;
const SPATIAL_PROBES_PER_AXIS: usize = 8;
const BARRIER_RTOL: f64 = 1e-10;

struct ReparamMetric {
    inner: Arc<dyn ConformalMetric>,
    phi: Phi,
    to_original: MonotoneCubic,
    lo: f64,
    hi: f64,
    step: f64,
}

impl ReparamMetric {
    fn original_time(&self, xt: f64) -> f64 {
        self.to_original.eval(xt)
    }

    /// `(phi, phi')` with a fourth-order central difference kept inside the inner domain.
    fn phi_and_slope(&self, x0: f64) -> (f64, f64) {
        let room = ((x0 - self.lo) / 3.0).min((self.hi - x0) / 3.0);
        let h = self.step.min(room);
        let f = &self.phi;
        let slope = (-f(x0 + 2.0 * h) + 8.0 * f(x0 + h) - 8.0 * f(x0 - h) + f(x0 - 2.0 * h)) / (12.0 * h);
        (f(x0), slope)
    }
}

impl ConformalMetric for ReparamMetric {
    fn psi(&self, xt: f64, x: &[f64]) -> f64 {
        let x0 = self.original_time(xt);
        self.inner.psi(x0, x) - (self.phi)(x0).ln()
    }
    fn dpsi(&self, xt: f64, x: &[f64]) -> (f64, Vect) {
        let x0 = self.original_time(xt);
        let (p, dp) = self.phi_and_slope(x0);
        let (psi0, grad) = self.inner.dpsi(x0, x);
        ((psi0 - dp / p) / p, grad)
    }
    fn sigma(&self, xt: f64, x: &[f64]) -> Mat {
        let x0 = self.original_time(xt);
        let p = (self.phi)(x0);
        self.inner.sigma(x0, x).scaled(p * p)
    }
    fn dsigma0(&self, xt: f64, x: &[f64]) -> Mat {
        let x0 = self.original_time(xt);
        let (p, dp) = self.phi_and_slope(x0);
        self.inner.sigma(x0, x).scaled(2.0 * dp).add(&self.inner.dsigma0(x0, x).scaled(p))
    }
    fn dsigmak(&self, xt: f64, x: &[f64], k: usize) -> Mat {
        let x0 = self.original_time(xt);
        let p = (self.phi)(x0);
        self.inner.dsigmak(x0, x, k).scaled(p * p)
    }
    fn ricci_nu_nu(&self, xt: f64, x: &[f64], nu: &Vect) -> Option<f64> {
        let x0 = self.original_time(xt);
        let mut back = *nu;
        back[0] = nu[0] / (self.phi)(x0);
        self.inner.ricci_nu_nu(x0, x, &back)
    }
}

/// Reparameterizes on `[tau0, b)` with `b` the upper end of the model's time range
/// (or of its sample window when the range is unbounded).
pub fn reparameterize(model: &SpacetimeModel, phi: Phi, tau0: f64) -> Result<SpacetimeModel> {
    let (_, hi) = model.x0_range();
    let b = if hi.is_finite() { hi } else { model.sample_window().1 };
    reparameterize_until(model, phi, tau0, b)
}

pub fn reparameterize_until(model: &SpacetimeModel, phi: Phi, tau0: f64, b: f64) -> Result<SpacetimeModel> {
    let (lo, hi) = model.x0_range();
    if !(tau0 > lo && tau0 < b && b <= hi && b.is_finite()) {
        return Err(ImcfError::Domain(format!("[{tau0}, {b}) not inside ({lo}, {hi})")));
    }
    // stay strictly inside an open upper end
    let b_eff = if b == hi { b - 1e-9 * (b - tau0) } else { b };
    let h = (b_eff - tau0) / QUADRATURE_NODES as f64;
    let nodes: Vec<f64> = (0..=QUADRATURE_NODES).map(|k| tau0 + k as f64 * h).collect();
    let probes = spatial_probes(model.periods());
    let mut values = Vec::with_capacity(nodes.len());
    for &x0 in &nodes {
        let p = phi(x0);
        if !(p > 0.0 && p.is_finite()) {
            return Err(ImcfError::NotPositive { at: x0, value: p });
        }
        for x in &probes {
            let sg = slice_geometry(model, x0, x)?;
            let rate = sg.conf * sg.hbar_trace;
            if rate < p * (1.0 - BARRIER_RTOL) {
                return Err(ImcfError::BarrierViolated { at: x0, lhs: rate, phi: p });
            }
        }
        values.push(p);
    }
    let new_times = cumulative_simpson(&values, h);
    let top = *new_times.last().expect("nonempty quadrature grid");
    let to_original = MonotoneCubic::new(new_times, nodes)?;
    let metric = ReparamMetric {
        inner: model.metric_arc(),
        phi,
        to_original,
        lo,
        hi,
        step: 1e-4 * model.length_scale(),
    };
    SpacetimeModel::new(
        format!("{}~reparam", model.name()),
        format!("{}~reparam(tau0={tau0},b={b})", model.descriptor()),
        (0.0, top),
        model.periods().to_vec(),
        (0.0, top),
        model.length_scale(),
        Arc::new(metric),
    )
}

/// Regular lattice of probe points over the torus.
pub(crate) fn spatial_probes(periods: &[f64]) -> Vec<Vec<f64>> {
    let d = periods.len();
    let total = SPATIAL_PROBES_PER_AXIS.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            let mut x = vec![0.0; d];
            for k in (0..d).rev() {
                let i = idx % SPATIAL_PROBES_PER_AXIS;
                idx /= SPATIAL_PROBES_PER_AXIS;
                x[k] = periods[k] * i as f64 / SPATIAL_PROBES_PER_AXIS as f64;
            }
            x
        })
        .collect()
}
