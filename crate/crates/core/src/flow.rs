//! Explicit time integration of the graph-gauge flow `du/dt = e^{-psi} v / H`.

use crate::analysis::residuals::{residual_hinv_evolution, residual_metric_evolution};
use crate::analysis::tau_of_t;
use crate::error::{ImcfError, Result};
use crate::geometry::{compute_geometry_with, GeometryOptions, GeometrySnapshot, GraphState, EPS_SPACE};
use crate::grid::{FdOrder, ScalarField};
use crate::linalg::Mat;
use crate::par;
use crate::spacetime::SpacetimeModel;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    #[default]
    Rk2,
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub cfl: f64,
    pub t_max: f64,
    pub fd_order: FdOrder,
    pub h_min_floor: f64,
    pub vtilde_abort: f64,
    /// A record is written every `record_every` steps and at the final step.
    pub record_every: usize,
    /// Graph states are stored at multiples of this; `0` stores only the first and last.
    pub snapshot_every: f64,
    pub integrator: Integrator,
    pub eps_space: f64,
    /// Fill the residual columns of the trace.
    pub residuals: bool,
}

impl FlowConfig {
    pub fn new(t_max: f64) -> Self {
        Self {
            cfl: 0.5,
            t_max,
            fd_order: FdOrder::Second,
            h_min_floor: 1e-8,
            vtilde_abort: 1e6,
            record_every: 1,
            snapshot_every: 0.0,
            integrator: Integrator::Rk2,
            eps_space: EPS_SPACE,
            residuals: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(ImcfError::Precondition(what.to_string()));
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl must lie in (0, 1]");
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad("t_max must be positive and finite");
        }
        if !(self.h_min_floor > 0.0) || !(self.vtilde_abort > 1.0) || !(self.eps_space > 0.0 && self.eps_space < 1.0) {
            return bad("thresholds must be positive (vtilde_abort > 1, eps_space < 1)");
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1");
        }
        if !(self.snapshot_every >= 0.0) {
            return bad("snapshot_every must be non-negative");
        }
        Ok(())
    }

    fn geometry_options(&self) -> GeometryOptions {
        GeometryOptions { order: self.fd_order, eps_space: self.eps_space }
    }
}

/// One row of the flow time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub t: f64,
    pub tau: f64,
    pub dt: f64,
    pub volume: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub vtilde_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Metric evolution residual over the preceding step; NaN when unavailable.
    pub residual_g: f64,
    /// `H^{-1}` evolution residual centred one step back; NaN when unavailable.
    pub residual_hinv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Completed,
    DomainBoundary,
    HFloor,
    VtildeAbort,
    SpacelikeMargin,
}

impl StopReason {
    /// Stops that signal a discretization breakdown rather than a normal end.
    pub fn is_numerical_failure(self) -> bool {
        matches!(self, Self::HFloor | Self::VtildeAbort | Self::SpacelikeMargin)
    }
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub records: Vec<FlowRecord>,
    pub snapshots: Vec<GraphState>,
    /// `inf H` on the initial graph.
    pub c0: f64,
    /// `d / c0`
    pub lifespan_c: f64,
    pub d: usize,
    pub steps: usize,
    pub stop_reason: StopReason,
    pub stop_detail: Option<String>,
    pub final_state: GraphState,
}

/// Largest stable explicit step: `cfl * min(H^2 / lambda_max(g^{-1})) * h_min^2 / (2 d)`.
pub fn stable_dt(snap: &GeometrySnapshot, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(ImcfError::Precondition(format!("cfl = {cfl} not in (0, 1]")));
    }
    let (p, hmin) = snap.mean_curvature.argmin();
    if !(hmin > 0.0) {
        return Err(ImcfError::NonPositiveH { value: hmin, point: p });
    }
    let grid = snap.grid();
    let d = grid.dim();
    let ratios = par::map(grid.len(), |p| {
        let h = snap.mean_curvature.get(p);
        h * h / lambda_max(&snap.ginv.get(p))
    });
    let m = ratios.into_iter().fold(f64::INFINITY, f64::min);
    let hm = grid.h_min();
    Ok(cfl * m * hm * hm / (2.0 * d as f64))
}

fn lambda_max(m: &Mat) -> f64 {
    match m.dim() {
        1 => m[(0, 0)],
        2 => {
            let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
            0.5 * (a + c) + (0.25 * (a - c) * (a - c) + b * b).sqrt()
        }
        _ => {
            let ev = m.symmetric_eigenvalues();
            ev[ev.len() - 1]
        }
    }
}

fn speed_checked(snap: &GeometrySnapshot, floor: f64) -> Result<ScalarField> {
    let (p, hmin) = snap.mean_curvature.argmin();
    if !(hmin > floor) {
        return Err(ImcfError::NonPositiveH { value: hmin, point: p });
    }
    Ok(snap.speed())
}

fn axpy(u: &ScalarField, dt: f64, k: &ScalarField) -> ScalarField {
    let a = u.values();
    let b = k.values();
    let data = par::map(a.len(), |p| a[p] + dt * b[p]);
    ScalarField::new(u.grid().clone(), data).expect("same grid")
}

/// Advances from an already computed snapshot of the current state.
pub fn step_from(model: &SpacetimeModel, snap: &GeometrySnapshot, dt: f64, cfg: &FlowConfig) -> Result<GraphState> {
    let u = &snap.u;
    if dt == 0.0 {
        return Ok(GraphState::new(snap.t, u.clone()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ImcfError::Precondition(format!("time step {dt} must be positive")));
    }
    let opts = cfg.geometry_options();
    let floor = cfg.h_min_floor;
    let t = snap.t;
    let rhs = |tt: f64, v: ScalarField| -> Result<ScalarField> {
        speed_checked(&compute_geometry_with(model, &GraphState::new(tt, v), opts)?, floor)
    };
    let k1 = speed_checked(snap, floor)?;
    let next = match cfg.integrator {
        Integrator::Euler => axpy(u, dt, &k1),
        Integrator::Rk2 => {
            let k2 = rhs(t + dt, axpy(u, dt, &k1))?;
            let (a, b) = (k1.values(), k2.values());
            let data = par::map(a.len(), |p| u.get(p) + 0.5 * dt * (a[p] + b[p]));
            ScalarField::new(u.grid().clone(), data)?
        }
        Integrator::Rk4 => {
            let k2 = rhs(t + 0.5 * dt, axpy(u, 0.5 * dt, &k1))?;
            let k3 = rhs(t + 0.5 * dt, axpy(u, 0.5 * dt, &k2))?;
            let k4 = rhs(t + dt, axpy(u, dt, &k3))?;
            let (a, b, c, e) = (k1.values(), k2.values(), k3.values(), k4.values());
            let data = par::map(a.len(), |p| u.get(p) + dt / 6.0 * (a[p] + 2.0 * b[p] + 2.0 * c[p] + e[p]));
            ScalarField::new(u.grid().clone(), data)?
        }
    };
    if !next.is_finite() {
        return Err(ImcfError::NumericalBlowup(format!("non-finite graph after step at t = {t}")));
    }
    Ok(GraphState::new(t + dt, next))
}

/// One step of size `dt` from `state`.
pub fn step(model: &SpacetimeModel, state: &GraphState, dt: f64, cfg: &FlowConfig) -> Result<GraphState> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let snap = compute_geometry_with(model, state, cfg.geometry_options())?;
    step_from(model, &snap, dt, cfg)
}

fn stop_for(e: &ImcfError) -> Option<StopReason> {
    match e {
        ImcfError::Domain(_) => Some(StopReason::DomainBoundary),
        ImcfError::NonPositiveH { .. } => Some(StopReason::HFloor),
        ImcfError::NotSpacelike { .. } => Some(StopReason::SpacelikeMargin),
        _ => None,
    }
}

fn record(
    model: &SpacetimeModel,
    window: &VecDeque<Arc<GeometrySnapshot>>,
    dt: f64,
    cfg: &FlowConfig,
    d: usize,
) -> Result<FlowRecord> {
    let s = window.back().expect("window is never empty");
    let n = window.len();
    let (residual_g, residual_hinv) = if cfg.residuals {
        let rg = if n >= 2 { residual_metric_evolution(&window[n - 2], s)? } else { f64::NAN };
        let rh = if n >= 3 { residual_hinv_evolution(model, &window[n - 3], &window[n - 2], s)? } else { f64::NAN };
        (rg, rh)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(FlowRecord {
        t: s.t,
        tau: tau_of_t(s.t, d)?,
        dt,
        volume: s.volume,
        h_min: s.h_min(),
        h_max: s.h_max(),
        vtilde_max: s.vtilde.max(),
        u_min: s.u.min(),
        u_max: s.u.max(),
        residual_g,
        residual_hinv,
    })
}

/// Runs the flow from `u0` at `t = 0` until `t_max` or a stop condition.
pub fn run(model: &SpacetimeModel, u0: ScalarField, cfg: &FlowConfig) -> Result<FlowTrace> {
    cfg.validate()?;
    let d = model.dim();
    let opts = cfg.geometry_options();
    let mut state = GraphState::new(0.0, u0);
    let first = compute_geometry_with(model, &state, opts)?;
    let (p, c0) = first.mean_curvature.argmin();
    if !(c0 > 0.0) {
        return Err(ImcfError::InitialDataInvalid(format!(
            "mean curvature of the initial graph must be positive, found H = {c0} at point {p}"
        )));
    }
    let mut window: VecDeque<Arc<GeometrySnapshot>> = VecDeque::with_capacity(3);
    window.push_back(Arc::new(first));
    let mut records = vec![record(model, &window, 0.0, cfg, d)?];
    let mut snapshots = vec![state.clone()];
    let mut next_snapshot = if cfg.snapshot_every > 0.0 { cfg.snapshot_every } else { f64::INFINITY };
    let mut steps = 0usize;
    let mut stop_detail = None;
    let end_tol = 1e-12 * cfg.t_max;

    let stop_reason = loop {
        if state.t >= cfg.t_max - end_tol {
            break StopReason::Completed;
        }
        let cur = window.back().expect("window is never empty").clone();
        if cur.vtilde.max() > cfg.vtilde_abort {
            stop_detail = Some(format!("vtilde {} above {}", cur.vtilde.max(), cfg.vtilde_abort));
            break StopReason::VtildeAbort;
        }
        let mut dt = match stable_dt(&cur, cfg.cfl) {
            Ok(dt) => dt,
            Err(e) => match stop_for(&e) {
                Some(r) => {
                    stop_detail = Some(e.to_string());
                    break r;
                }
                None => return Err(e),
            },
        };
        let target = next_snapshot.min(cfg.t_max);
        let snap_due = state.t + dt >= target - end_tol;
        if snap_due {
            dt = target - state.t;
        }
        let advanced = step_from(model, &cur, dt, cfg).and_then(|s| {
            let g = compute_geometry_with(model, &s, opts)?;
            Ok((s, g))
        });
        let (next, geom) = match advanced {
            Ok(pair) => pair,
            Err(e) => match stop_for(&e) {
                Some(r) => {
                    stop_detail = Some(e.to_string());
                    break r;
                }
                None => return Err(e),
            },
        };
        steps += 1;
        state = next;
        if snap_due && state.t >= target - end_tol {
            // land exactly on the target to keep cadences reproducible
            state.t = target;
        }
        if window.len() == 3 {
            window.pop_front();
        }
        let mut geom = geom;
        geom.t = state.t;
        window.push_back(Arc::new(geom));
        let finished = state.t >= cfg.t_max - end_tol;
        if steps.is_multiple_of(cfg.record_every) || finished {
            records.push(record(model, &window, dt, cfg, d)?);
        }
        if state.t >= next_snapshot - end_tol && next_snapshot.is_finite() {
            snapshots.push(state.clone());
            next_snapshot += cfg.snapshot_every;
        }
    };
    if records.last().map(|r| r.t) != Some(state.t) {
        let dt = records.last().map(|r| state.t - r.t).unwrap_or(0.0);
        records.push(record(model, &window, dt, cfg, d)?);
    }
    if snapshots.last().map(|s| s.t) != Some(state.t) {
        snapshots.push(state.clone());
    }
    Ok(FlowTrace {
        records,
        snapshots,
        c0,
        lifespan_c: d as f64 / c0,
        d,
        steps,
        stop_reason,
        stop_detail,
        final_state: state,
    })
}
