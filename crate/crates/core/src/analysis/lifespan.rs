use super::{tau_of_t, CheckReport};
use crate::error::{ImcfError, Result};
use crate::flow::FlowTrace;
use crate::linalg::Vect;
use crate::numerics::{adaptive_simpson, integrate_to_infinity, MonotoneCubic};
use crate::par;
use crate::spacetime::SpacetimeModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LIFESPAN_SLACK: f64 = 1e-3;
const QUAD_TOL: f64 = 1e-12;
const SNAPSHOT_TIME_TOL: f64 = 1e-9;
const MAX_TILT: f64 = 0.9;

/// Proper length of `s -> (s, x + w (s - s0))` from `s0` to the future end of the model.
fn proper_length(model: &SpacetimeModel, s0: f64, x: &[f64], w: &Vect) -> Result<f64> {
    let point = |s: f64| -> Vec<f64> { x.iter().enumerate().map(|(i, &xi)| xi + w[i] * (s - s0)).collect() };
    let integrand = |s: f64| {
        let y = point(s);
        let q = model.sigma(s, &y).bilinear(w, w);
        model.psi(s, &y).exp() * (1.0 - q).max(0.0).sqrt()
    };
    let (_, hi) = model.x0_range();
    let scale = integrand(s0).abs().max(1e-300);
    if hi.is_finite() {
        // the end itself is excluded from the domain
        let end = hi - 1e-12 * (hi - s0).abs().max(1.0);
        Ok(adaptive_simpson(&integrand, s0, end, QUAD_TOL * scale))
    } else {
        integrate_to_infinity(&integrand, s0, QUAD_TOL * scale)
    }
}

/// Remaining proper time along straight future-directed coordinate lines from `M(t_eval)`,
/// compared with `c (1 - tau)`, `c = d / inf_{M_0} H`.
///
/// Curve 0 is vertical through the lowest graph point; a quarter of the rest are
/// vertical through random grid points and the others are tilted.
pub fn lifespan_bound_check(
    model: &SpacetimeModel,
    trace: &FlowTrace,
    t_eval: f64,
    n_curves: usize,
    seed: u64,
) -> Result<CheckReport> {
    if n_curves == 0 {
        return Err(ImcfError::Precondition("need at least one curve".into()));
    }
    let snap = trace
        .snapshots
        .iter()
        .find(|s| (s.t - t_eval).abs() <= SNAPSHOT_TIME_TOL * t_eval.abs().max(1.0))
        .ok_or_else(|| ImcfError::Precondition(format!("trace holds no snapshot at t = {t_eval}")))?;
    let grid = snap.grid();
    let d = grid.dim();
    let tau = tau_of_t(t_eval, trace.d)?;
    let bound = trace.lifespan_c * (1.0 - tau);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut curves: Vec<(usize, Vect)> = vec![(snap.u.argmin().0, Vect::zeros(d))];
    for k in 1..n_curves {
        let p = rng.random_range(0..grid.len());
        if k % 4 == 0 {
            curves.push((p, Vect::zeros(d)));
        } else {
            let dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            curves.push((p, Vect::from_slice(&dir)));
        }
        let speed = rng.random_range(0.05..MAX_TILT);
        let last = curves.last_mut().expect("just pushed");
        if last.1.norm() > 0.0 {
            let x = grid.point(last.0);
            let len = model.sigma(snap.u.get(last.0), &x).bilinear(&last.1, &last.1).sqrt();
            last.1 = last.1.scaled(speed / len);
        }
    }
    let lengths = par::try_map(curves.len(), |k| {
        let (p, w) = &curves[k];
        proper_length(model, snap.u.get(*p), &grid.point(*p), w)
    })?;
    let (k, longest) = lengths
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let vertical_longest = curves
        .iter()
        .zip(&lengths)
        .filter(|(c, _)| c.1.norm() == 0.0)
        .map(|(_, l)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let tilted_longest = curves
        .iter()
        .zip(&lengths)
        .filter(|(c, _)| c.1.norm() > 0.0)
        .map(|(_, l)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let ratio = longest / bound;
    let mut report = CheckReport::new("lifespan_bound", ratio <= 1.0 + LIFESPAN_SLACK, ratio, 1.0 + LIFESPAN_SLACK)
        .at(t_eval, grid.point(curves[k].0))
        .with_samples(curves.len())
        .with_seed(seed)
        .detail("bound", bound)
        .detail("c", trace.lifespan_c)
        .detail("tau", tau)
        .detail("max_length", longest)
        .detail("max_vertical_length", vertical_longest);
    if tilted_longest.is_finite() {
        report = report.detail("max_tilted_length", tilted_longest);
    }
    Ok(report)
}

/// Flow time `t` at which the foliation passes through the event `(x0, x)`.
///
/// `x` is snapped to the nearest grid point; `t -> u(t, x)` is inverted by
/// monotone cubic interpolation over the stored snapshots.
pub fn time_function_lookup(trace: &FlowTrace, x0: f64, x: &[f64]) -> Result<f64> {
    let first = trace
        .snapshots
        .first()
        .ok_or_else(|| ImcfError::OutOfFoliation("trace holds no snapshots".into()))?;
    let grid = first.grid();
    if x.len() != grid.dim() {
        return Err(ImcfError::Precondition(format!("event has {} spatial coordinates, grid has {}", x.len(), grid.dim())));
    }
    let idx: Vec<usize> = (0..grid.dim())
        .map(|a| {
            let n = grid.shape()[a];
            let r = (x[a] / grid.spacing()[a]).round().rem_euclid(n as f64);
            r as usize % n
        })
        .collect();
    let p = grid.flat_index(&idx);
    let ts: Vec<f64> = trace.snapshots.iter().map(|s| s.t).collect();
    let us: Vec<f64> = trace.snapshots.iter().map(|s| s.u.get(p)).collect();
    let (lo, hi) = (us[0], *us.last().expect("nonempty"));
    if !(x0 >= lo && x0 <= hi) {
        return Err(ImcfError::OutOfFoliation(format!(
            "x0 = {x0} outside the swept interval [{lo}, {hi}] at grid point {p}"
        )));
    }
    if us.len() == 1 {
        return Ok(ts[0]);
    }
    Ok(MonotoneCubic::new(us, ts)?.eval(x0))
}
