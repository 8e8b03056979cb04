//! Ambient Ricci tensor by central finite differences of the metric components.

use super::SpacetimeModel;
use crate::error::{ImcfError, Result};
use crate::linalg::{Mat, Vect, MAX_DIM};

type Gamma = [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM];

/// Relative step, scaled by the model's length scale.
const STEP_FRACTION: f64 = 1e-3;

fn general_inverse(g: &Mat) -> Result<Mat> {
    let n = g.dim();
    let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| g[(i, j)]);
    let inv = dm
        .try_inverse()
        .ok_or_else(|| ImcfError::SingularMetric("spacetime metric not invertible".into()))?;
    Ok(Mat::from_fn(n, |i, j| inv[(i, j)]))
}

fn shifted(p: &Vect, axis: usize, delta: f64) -> Vect {
    let mut q = *p;
    q[axis] += delta;
    q
}

fn metric_at(model: &SpacetimeModel, p: &Vect) -> Mat {
    model.metric_tensor(p[0], &p.as_slice()[1..])
}

/// First and second central differences of `g_ab` at `p`.
/// Mixed second derivatives use the four-corner stencil.
fn metric_jets(model: &SpacetimeModel, p: &Vect, h: f64) -> (Mat, [Mat; MAX_DIM], [[Mat; MAX_DIM]; MAX_DIM]) {
    let n = p.len();
    let g = metric_at(model, p);
    let mut dg = [Mat::zeros(n); MAX_DIM];
    let mut ddg = [[Mat::zeros(n); MAX_DIM]; MAX_DIM];
    for c in 0..n {
        let plus = metric_at(model, &shifted(p, c, h));
        let minus = metric_at(model, &shifted(p, c, -h));
        dg[c] = plus.sub(&minus).scaled(0.5 / h);
        ddg[c][c] = plus.add(&minus).sub(&g.scaled(2.0)).scaled(1.0 / (h * h));
    }
    for c in 0..n {
        for e in c + 1..n {
            let pp = metric_at(model, &shifted(&shifted(p, c, h), e, h));
            let pm = metric_at(model, &shifted(&shifted(p, c, h), e, -h));
            let mp = metric_at(model, &shifted(&shifted(p, c, -h), e, h));
            let mm = metric_at(model, &shifted(&shifted(p, c, -h), e, -h));
            let mixed = pp.sub(&pm).sub(&mp).add(&mm).scaled(0.25 / (h * h));
            ddg[c][e] = mixed;
            ddg[e][c] = mixed;
        }
    }
    (g, dg, ddg)
}

/// Full Ricci tensor `R_ab` at `(x0, x)`.
///
/// Second-order central stencils at steps `h` and `h/2`, Richardson-combined.
pub fn ricci_tensor_fd(model: &SpacetimeModel, x0: f64, x: &[f64]) -> Result<Mat> {
    let h = STEP_FRACTION * model.length_scale();
    let (lo, hi) = model.x0_range();
    if !(x0 - 2.0 * h > lo && x0 + 2.0 * h < hi) {
        return Err(ImcfError::Domain(format!(
            "curvature stencil around x0 = {x0} (step {h}) leaves ({lo}, {hi})"
        )));
    }
    let n = model.dim() + 1;
    let mut p = Vect::zeros(n);
    p[0] = x0;
    for (i, &xi) in x.iter().enumerate() {
        p[i + 1] = xi;
    }
    let coarse = ricci_at_step(model, &p, h)?;
    let fine = ricci_at_step(model, &p, 0.5 * h)?;
    Ok(fine.scaled(4.0 / 3.0).sub(&coarse.scaled(1.0 / 3.0)).symmetrized())
}

fn ricci_at_step(model: &SpacetimeModel, p: &Vect, h: f64) -> Result<Mat> {
    let n = p.len();
    let (g, dg, ddg) = metric_jets(model, p, h);
    let ginv = general_inverse(&g)?;
    // s[k][a][b] = d_a g_kb + d_b g_ka - d_k g_ab
    let mut s = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    // ds[c][k][a][b] = d_c s[k][a][b]
    let mut ds = [[[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                s[k][a][b] = dg[a][(k, b)] + dg[b][(k, a)] - dg[k][(a, b)];
                for c in 0..n {
                    ds[c][k][a][b] = ddg[c][a][(k, b)] + ddg[c][b][(k, a)] - ddg[c][k][(a, b)];
                }
            }
        }
    }
    // d_c g^{lk} = -g^{lm} d_c g_mq g^{qk}
    let mut dginv = [Mat::zeros(n); MAX_DIM];
    for c in 0..n {
        dginv[c] = ginv.mul(&dg[c]).mul(&ginv).scaled(-1.0);
    }
    let mut gamma: Gamma = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    let mut dgamma = [[[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for l in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += ginv[(l, k)] * s[k][a][b];
                }
                gamma[l][a][b] = 0.5 * acc;
                for c in 0..n {
                    let mut d = 0.0;
                    for k in 0..n {
                        d += dginv[c][(l, k)] * s[k][a][b] + ginv[(l, k)] * ds[c][k][a][b];
                    }
                    dgamma[c][l][a][b] = 0.5 * d;
                }
            }
        }
    }
    let mut ric = Mat::zeros(n);
    for b in 0..n {
        for d in b..n {
            let mut acc = 0.0;
            for a in 0..n {
                acc += dgamma[a][a][b][d] - dgamma[d][a][b][a];
                for e in 0..n {
                    acc += gamma[a][a][e] * gamma[e][b][d] - gamma[a][d][e] * gamma[e][b][a];
                }
            }
            ric[(b, d)] = acc;
            ric[(d, b)] = acc;
        }
    }
    Ok(ric)
}

/// `Ric(nu, nu)` from [`ricci_tensor_fd`], ignoring any closed form the model carries.
pub fn ricci_contraction_fd(model: &SpacetimeModel, x0: f64, x: &[f64], nu: &Vect) -> Result<f64> {
    Ok(ricci_tensor_fd(model, x0, x)?.bilinear(nu, nu))
}
