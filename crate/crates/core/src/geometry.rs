//! Induced geometry of a spacelike graph `{x0 = u(x)}`.

use crate::error::{ImcfError, Result};
use crate::grid::{
    covariant_hessian_from, fd_gradient, fd_hessian, integrate_field, metric_christoffels, Christoffels, FdOrder,
    PeriodicGrid, ScalarField, SymMatrixField, VectorField,
};
use crate::linalg::{Mat, Vect};
use crate::par;
use crate::spacetime::SpacetimeModel;
use std::sync::Arc;

/// Default spacelike margin: `|Du|^2` must stay at or below `1 - EPS_SPACE`.
pub const EPS_SPACE: f64 = 1e-6;

/// A graph at flow parameter `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphState {
    pub t: f64,
    pub u: ScalarField,
}

impl GraphState {
    pub fn new(t: f64, u: ScalarField) -> Self {
        Self { t, u }
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        self.u.grid()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryOptions {
    pub order: FdOrder,
    pub eps_space: f64,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self { order: FdOrder::Second, eps_space: EPS_SPACE }
    }
}

/// Everything the flow and the residual monitors need about one graph.
#[derive(Debug, Clone)]
pub struct GeometrySnapshot {
    pub t: f64,
    pub u: ScalarField,
    pub order: FdOrder,
    /// `u_i`
    pub du: VectorField,
    pub v: ScalarField,
    pub vtilde: ScalarField,
    pub psi: ScalarField,
    pub g: SymMatrixField,
    pub ginv: SymMatrixField,
    pub gamma: Christoffels,
    pub sqrtg: ScalarField,
    /// Past-directed unit normal, `d + 1` contravariant components per point.
    nu: Vec<f64>,
    pub h: SymMatrixField,
    pub mean_curvature: ScalarField,
    pub norm_a2: ScalarField,
    pub volume: f64,
}

impl GeometrySnapshot {
    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        self.u.grid()
    }

    pub fn nu(&self, p: usize) -> Vect {
        let w = self.grid().dim() + 1;
        Vect::from_slice(&self.nu[p * w..(p + 1) * w])
    }

    /// Tangential coordinate velocity `W^k = -nu^k / H` of flow points at fixed grid `x`.
    pub fn tangential_velocity(&self) -> VectorField {
        let grid = self.grid().clone();
        let d = grid.dim();
        let mut out = vec![0.0; grid.len() * d];
        par::fill_chunks(&mut out, d, |p, c| {
            let hinv = 1.0 / self.mean_curvature.get(p);
            for (k, slot) in c.iter_mut().enumerate() {
                *slot = -self.nu[p * (d + 1) + k + 1] * hinv;
            }
        });
        VectorField::new(grid, out).expect("width matches grid")
    }

    /// Graph-gauge speed `e^{-psi} v / H`.
    pub fn speed(&self) -> ScalarField {
        let n = self.grid().len();
        let data = par::map(n, |p| (-self.psi.get(p)).exp() * self.v.get(p) / self.mean_curvature.get(p));
        ScalarField::new(self.grid().clone(), data).expect("length matches grid")
    }

    pub fn h_min(&self) -> f64 {
        self.mean_curvature.min()
    }

    pub fn h_max(&self) -> f64 {
        self.mean_curvature.max()
    }
}

struct PointData {
    psi: f64,
    v: f64,
    g: Mat,
    /// `psi' u_i u_j + psi_j u_i + psi_i u_j + Gamma^0_ij`, the ambient part of `h_ij` before scaling.
    ambient: Mat,
    /// `sigma^{ij} u_j`
    du_up: Vect,
}

fn point_data(model: &SpacetimeModel, x0: f64, x: &[f64], du: &Vect, eps: f64, p: usize) -> Result<PointData> {
    model.check_x0(x0)?;
    let d = du.len();
    let psi = model.psi(x0, x);
    let (psi0, psi_x) = model.dpsi(x0, x);
    let sigma = model.sigma(x0, x);
    let ds0 = model.dsigma0(x0, x);
    let du_up = sigma.cholesky()?.solve(du);
    let grad2 = du.dot(&du_up);
    if !(grad2 <= 1.0 - eps) {
        return Err(ImcfError::NotSpacelike { value: grad2, margin: eps, point: p });
    }
    let e2 = (2.0 * psi).exp();
    let g = Mat::from_fn(d, |i, j| e2 * (sigma[(i, j)] - du[i] * du[j]));
    let ambient = Mat::from_fn(d, |i, j| {
        psi0 * du[i] * du[j] + psi_x[j] * du[i] + psi_x[i] * du[j] + 0.5 * ds0[(i, j)] + psi0 * sigma[(i, j)]
    });
    Ok(PointData { psi, v: (1.0 - grad2).sqrt(), g, ambient, du_up })
}

/// Geometry of `graph u` with the default stencil order and spacelike margin.
pub fn compute_geometry(model: &SpacetimeModel, state: &GraphState) -> Result<GeometrySnapshot> {
    compute_geometry_with(model, state, GeometryOptions::default())
}

pub fn compute_geometry_with(model: &SpacetimeModel, state: &GraphState, opts: GeometryOptions) -> Result<GeometrySnapshot> {
    let grid = state.grid().clone();
    if grid.dim() != model.dim() {
        return Err(ImcfError::Precondition(format!(
            "grid dimension {} differs from model dimension {}",
            grid.dim(),
            model.dim()
        )));
    }
    if !state.u.is_finite() {
        return Err(ImcfError::NumericalBlowup(format!("non-finite graph values at t = {}", state.t)));
    }
    let d = grid.dim();
    let n = grid.len();
    let du = fd_gradient(&state.u, opts.order);
    let pts = par::try_map(n, |p| point_data(model, state.u.get(p), &grid.point(p), &du.get(p), opts.eps_space, p))?;

    let g = SymMatrixField::from_mats(grid.clone(), &pts.iter().map(|q| q.g).collect::<Vec<_>>())?;
    let gamma = metric_christoffels(&g, opts.order)?;
    let hess = covariant_hessian_from(&fd_hessian(&state.u, opts.order), &du, &gamma);

    // per point: ginv (d^2), sqrtg, h (d^2), H, |A|^2, nu (d + 1)
    let width = 2 * d * d + 3 + d + 1;
    let rows = par::try_map(n, |p| {
        let q = &pts[p];
        let chol = q.g.cholesky()?;
        let ginv = chol.inverse();
        let conf = q.psi.exp();
        let h = Mat::from_fn(d, |i, j| -conf * q.v * (hess.component(p, i, j) + q.ambient[(i, j)])).symmetrized();
        let hmix = ginv.mul(&h);
        let mut row = Vec::with_capacity(width);
        row.extend((0..d * d).map(|k| ginv[(k / d, k % d)]));
        row.push(chol.det().sqrt());
        row.extend((0..d * d).map(|k| h[(k / d, k % d)]));
        row.push(hmix.trace());
        row.push(hmix.mul(&hmix).trace());
        let s = -1.0 / (q.v * conf);
        row.push(s);
        row.extend((0..d).map(|k| s * q.du_up[k]));
        if row.iter().any(|x| !x.is_finite()) {
            return Err(ImcfError::NumericalBlowup(format!("non-finite geometry at point {p}, t = {}", state.t)));
        }
        Ok(row)
    })?;
    let packed: Vec<f64> = rows.concat();

    let col = |off: usize, w: usize| -> Vec<f64> {
        let mut out = Vec::with_capacity(n * w);
        for p in 0..n {
            out.extend_from_slice(&packed[p * width + off..p * width + off + w]);
        }
        out
    };
    let dd = d * d;
    let scalar = |data: Vec<f64>| ScalarField::new(grid.clone(), data);
    let v = scalar(pts.iter().map(|q| q.v).collect())?;
    let sqrtg = scalar(col(dd, 1))?;
    let volume = integrate_field(&sqrtg);
    Ok(GeometrySnapshot {
        t: state.t,
        u: state.u.clone(),
        order: opts.order,
        vtilde: v.map(|x| 1.0 / x),
        v,
        psi: scalar(pts.iter().map(|q| q.psi).collect())?,
        du,
        g,
        ginv: SymMatrixField::new(grid.clone(), col(0, dd))?,
        gamma,
        sqrtg,
        h: SymMatrixField::new(grid.clone(), col(dd + 1, dd))?,
        mean_curvature: scalar(col(2 * dd + 1, 1))?,
        norm_a2: scalar(col(2 * dd + 2, 1))?,
        nu: col(2 * dd + 3, d + 1),
        volume,
    })
}

/// Global extremes of the eigenvalues of `h^i_j` over all points.
pub fn principal_curvature_range(snap: &GeometrySnapshot) -> Result<(f64, f64)> {
    let n = snap.grid().len();
    let ranges = par::try_map(n, |p| {
        let ev = snap.g.get(p).cholesky()?.congruence(&snap.h.get(p)).symmetric_eigenvalues();
        Ok::<_, ImcfError>((ev[0], ev[ev.len() - 1]))
    })?;
    Ok(ranges
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| (lo.min(a), hi.max(b))))
}

/// `max vtilde`, the quantity bounded by the gradient estimate.
pub fn gradient_bound_certificate(snap: &GeometrySnapshot) -> f64 {
    snap.vtilde.max()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spacetime::{make_exp_rw, make_minkowski_slab, make_sads_interior, make_warped_rw, slice_geometry};
    use std::f64::consts::TAU;

    fn line(n: usize) -> Arc<PeriodicGrid> {
        Arc::new(PeriodicGrid::uniform(1, n).unwrap())
    }

    fn state(grid: &Arc<PeriodicGrid>, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> GraphState {
        GraphState::new(0.0, ScalarField::from_fn(grid.clone(), f))
    }

    #[test]
    fn flat_slice_of_minkowski() {
        let m = make_minkowski_slab(2, -1.0, 1.0, None).unwrap();
        let grid = Arc::new(PeriodicGrid::uniform(2, 16).unwrap());
        let s = compute_geometry(&m, &state(&grid, |_| 0.3)).unwrap();
        assert_eq!(s.v.min(), 1.0);
        assert_eq!(s.h.max_abs(), 0.0);
        assert_eq!(s.mean_curvature.max_abs(), 0.0);
        assert_eq!(s.sqrtg.min(), 1.0);
        assert!((s.volume - TAU * TAU).abs() < 1e-12);
        assert_eq!(principal_curvature_range(&s).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn homogeneous_exp_rw_slice() {
        let m = make_exp_rw(1.0, 1, None).unwrap();
        let s = compute_geometry(&m, &state(&line(64), |_| 0.0)).unwrap();
        for f in [&s.mean_curvature, &s.sqrtg, &s.vtilde, &s.norm_a2] {
            assert!((f.min() - 1.0).abs() < 1e-14 && (f.max() - 1.0).abs() < 1e-14);
        }
        assert!((s.volume - TAU).abs() < 1e-12);
        let (a, b) = principal_curvature_range(&s).unwrap();
        assert!((a - 1.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
    }

    #[test]
    fn homogeneous_exp_rw_plane_is_umbilic() {
        let m = make_exp_rw(1.0, 2, None).unwrap();
        let grid = Arc::new(PeriodicGrid::uniform(2, 16).unwrap());
        let s = compute_geometry(&m, &state(&grid, |_| 0.0)).unwrap();
        let (a, b) = principal_curvature_range(&s).unwrap();
        assert!((a - 1.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14, "{a} {b}");
    }

    #[test]
    fn constant_graphs_reproduce_slice_geometry() {
        let grid = Arc::new(PeriodicGrid::uniform(2, 8).unwrap());
        for (m, x0) in [
            (make_exp_rw(0.7, 2, None).unwrap(), 0.4),
            (make_warped_rw(1.0, 0.1, 2, None).unwrap(), 0.2),
            (make_sads_interior(1, -1.0, 1.0, 0).unwrap(), 0.5),
        ] {
            let s = compute_geometry(&m, &state(&grid, |_| x0)).unwrap();
            for p in 0..grid.len() {
                let sg = slice_geometry(&m, x0, &grid.point(p)).unwrap();
                assert!(s.h.get(p).sub(&sg.hbar).max_abs() < 1e-10, "{}", m.name());
                assert!((s.mean_curvature.get(p) - sg.hbar_trace).abs() < 1e-10 * sg.hbar_trace.abs().max(1.0));
            }
        }
    }

    #[test]
    fn invariants_hold_on_perturbed_graphs() {
        let m = make_warped_rw(1.0, 0.1, 2, None).unwrap();
        let grid = Arc::new(PeriodicGrid::uniform(2, 32).unwrap());
        let st = state(&grid, |x| 0.2 + 0.15 * x[0].sin() * x[1].cos());
        let s = compute_geometry(&m, &st).unwrap();
        for p in 0..grid.len() {
            let x = grid.point(p);
            let x0 = st.u.get(p);
            assert!(s.g.get(p).mul(&s.ginv.get(p)).sub(&Mat::identity(2)).max_abs() <= 1e-10);
            let h = s.mean_curvature.get(p);
            assert!(s.norm_a2.get(p) - h * h / 2.0 >= -1e-10);
            let nu = s.nu(p);
            assert!((m.lorentz_norm2(x0, &x, &nu) + 1.0).abs() <= 1e-10);
            assert!(nu[0] < 0.0, "past directed");
            let gbar = m.metric_tensor(x0, &x);
            let du = s.du.get(p);
            for i in 0..2 {
                let mut tangent = Vect::zeros(3);
                tangent[0] = du[i];
                tangent[i + 1] = 1.0;
                assert!(gbar.bilinear(&nu, &tangent).abs() <= 1e-8);
            }
            assert!(s.v.get(p) > 0.0 && s.v.get(p) <= 1.0 && s.vtilde.get(p) >= 1.0);
        }
    }

    #[test]
    fn mean_curvature_refines_at_second_order() {
        let m = make_exp_rw(1.0, 1, None).unwrap();
        let h_at = |n: usize| compute_geometry(&m, &state(&line(n), |x| 0.1 * x[0].sin())).unwrap().mean_curvature;
        let coarse = h_at(256);
        let fine = h_at(1024);
        let err = (0..256).fold(0.0f64, |e, p| e.max((coarse.get(p) - fine.get(4 * p)).abs()));
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn gradient_certificate() {
        let m = make_minkowski_slab(1, -1.0, 1.0, None).unwrap();
        let s = compute_geometry(&m, &state(&line(64), |_| 0.0)).unwrap();
        assert_eq!(gradient_bound_certificate(&s), 1.0);
        let e = make_exp_rw(1.0, 1, None).unwrap();
        let s = compute_geometry(&e, &state(&line(256), |x| 0.1 * x[0].sin())).unwrap();
        let c = gradient_bound_certificate(&s);
        // FD gradient of 0.1 sin peaks slightly below 0.1
        assert!((c - 1.0 / 0.99f64.sqrt()).abs() < 1e-5 && c >= 1.0, "{c}");
    }

    #[test]
    fn errors() {
        let m = make_exp_rw(1.0, 1, None).unwrap();
        let steep = state(&line(64), |x| 1.2 * x[0].sin());
        assert!(matches!(compute_geometry(&m, &steep), Err(ImcfError::NotSpacelike { .. })));
        let slab = make_minkowski_slab(1, -1.0, 1.0, None).unwrap();
        assert!(matches!(compute_geometry(&slab, &state(&line(8), |_| 2.0)), Err(ImcfError::Domain(_))));
        let plane = Arc::new(PeriodicGrid::uniform(2, 8).unwrap());
        assert!(matches!(compute_geometry(&m, &state(&plane, |_| 0.0)), Err(ImcfError::Precondition(_))));
        let nan = state(&line(8), |x| if x[0] > 1.0 { f64::NAN } else { 0.0 });
        assert!(matches!(compute_geometry(&m, &nan), Err(ImcfError::NumericalBlowup(_))));
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let m = make_warped_rw(1.0, 0.1, 2, None).unwrap();
        let grid = Arc::new(PeriodicGrid::uniform(2, 96).unwrap());
        let st = state(&grid, |x| 0.1 * x[0].cos() + 0.05 * x[1].sin());
        let a = compute_geometry(&m, &st).unwrap();
        par::set_sequential(true);
        let b = compute_geometry(&m, &st).unwrap();
        par::set_sequential(false);
        assert_eq!(a.mean_curvature, b.mean_curvature);
        assert_eq!(a.volume.to_bits(), b.volume.to_bits());
    }
}
