//! Discrete residuals of the flow evolution equations at fixed grid points.
//!
//! Graph-gauge data live at fixed `x`, while the evolution equations hold along
//! the normal flow, whose points drift with coordinate velocity
//! `W^k = -nu^k / H`. Both monitors add the corresponding transport terms.

use crate::error::{ImcfError, Result};
use crate::geometry::GeometrySnapshot;
use crate::grid::{fd_gradient, fd_jacobian, laplace_beltrami};
use crate::par;
use crate::spacetime::{ambient_ricci_contraction, SpacetimeModel};

fn check_pair(a: &GeometrySnapshot, b: &GeometrySnapshot) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(ImcfError::Precondition("snapshots live on different grids".into()));
    }
    let dt = b.t - a.t;
    if !(dt > 0.0) {
        return Err(ImcfError::Precondition(format!("snapshots not in increasing time ({} then {})", a.t, b.t)));
    }
    Ok(dt)
}

/// Max-norm of `(g(b) - g(a))/dt + 2 H^{-1} h + L_W g`, right-hand side taken at `a`.
///
/// The forward quotient makes the residual first order in `dt`.
pub fn residual_metric_evolution(a: &GeometrySnapshot, b: &GeometrySnapshot) -> Result<f64> {
    let dt = check_pair(a, b)?;
    let grid = a.grid().clone();
    let d = grid.dim();
    let w = a.tangential_velocity();
    let dw = fd_jacobian(&w, a.order);
    let worst = par::map(grid.len(), |p| {
        let ga = a.g.get(p);
        let gb = b.g.get(p);
        let h = a.h.get(p);
        let hinv = 1.0 / a.mean_curvature.get(p);
        let wp = w.get(p);
        let mut m: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                // d_k g_ij = g_lj Gamma^l_ki + g_il Gamma^l_kj
                let mut lie = 0.0;
                for k in 0..d {
                    let mut dk = 0.0;
                    for l in 0..d {
                        dk += ga[(l, j)] * a.gamma.get(p, l, k, i) + ga[(i, l)] * a.gamma.get(p, l, k, j);
                    }
                    lie += wp[k] * dk + ga[(k, j)] * dw[p][(k, i)] + ga[(i, k)] * dw[p][(k, j)];
                }
                let r = (gb[(i, j)] - ga[(i, j)]) / dt + 2.0 * hinv * h[(i, j)] + lie;
                m = m.max(r.abs());
            }
        }
        m
    });
    Ok(worst.into_iter().fold(0.0, f64::max))
}

/// `|d/dt log |M| + 1|` between two snapshots, the trace form of the metric evolution.
pub fn residual_log_volume_rate(a: &GeometrySnapshot, b: &GeometrySnapshot) -> Result<f64> {
    let dt = check_pair(a, b)?;
    Ok(((b.volume.ln() - a.volume.ln()) / dt + 1.0).abs())
}

/// Max-norm residual of the `H^{-1}` evolution equation centred on `b`:
/// `d/dt H^{-1} - H^{-2} Lap H^{-1} + H^{-2} (|A|^2 + Ric(nu, nu)) H^{-1}`.
///
/// `d/dt` is the total derivative along the flow, reconstructed as the
/// three-point partial derivative at fixed `x` plus `W^k d_k H^{-1}`.
pub fn residual_hinv_evolution(
    model: &SpacetimeModel,
    a: &GeometrySnapshot,
    b: &GeometrySnapshot,
    c: &GeometrySnapshot,
) -> Result<f64> {
    let h1 = check_pair(a, b)?;
    let h2 = check_pair(b, c)?;
    let grid = b.grid().clone();
    if b.mean_curvature.min() <= 0.0 {
        let (p, value) = b.mean_curvature.argmin();
        return Err(ImcfError::NonPositiveH { value, point: p });
    }
    let inv = |s: &GeometrySnapshot| s.mean_curvature.map(|x| 1.0 / x);
    let (fa, fb, fc) = (inv(a), inv(b), inv(c));
    let lap = laplace_beltrami(&fb, &b.ginv, &b.gamma, b.order);
    let grad = fd_gradient(&fb, b.order);
    let w = b.tangential_velocity();
    let (ca, cb, cc) = (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)));
    let worst = par::try_map(grid.len(), |p| {
        let f = fb.get(p);
        let dt = ca * fa.get(p) + cb * f + cc * fc.get(p);
        let transport = w.get(p).dot(&grad.get(p));
        let ric = ambient_ricci_contraction(model, b.u.get(p), &grid.point(p), &b.nu(p))?;
        let r = dt + transport - f * f * lap.get(p) + f * f * f * (b.norm_a2.get(p) + ric);
        Ok::<_, ImcfError>(r.abs())
    })?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

