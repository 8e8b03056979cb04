use super::{tau_of_t, CheckReport, DecayProfile};
use crate::error::{ImcfError, Result};
use crate::flow::FlowTrace;
use crate::linalg::Vect;
use crate::numerics::{cumulative_simpson, simpson};
use crate::par;
use crate::spacetime::{
    ambient_ricci_contraction, slice_geometry, spatial_probes, unit_timelike, Phi, SpacetimeModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

const TIMELIKE_TOL: f64 = 1e-8;
const MAX_TILT: f64 = 0.9;
const DECAY_TOL: f64 = 1e-10;
const IDENTITY_NODES: usize = 4096;
const IDENTITY_TOL: f64 = 1e-6;

pub const DEFAULT_BARRIER_THRESHOLD: f64 = 100.0;

/// `min Ric(nu, nu)` over seeded random events and unit timelike directions.
pub fn check_timelike_convergence(model: &SpacetimeModel, n_samples: usize, seed: u64) -> Result<CheckReport> {
    if n_samples == 0 {
        return Err(ImcfError::Precondition("need at least one sample".into()));
    }
    let (a, b) = model.sample_window();
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(f64, Vec<f64>, Vec<f64>, f64)> = (0..n_samples)
        .map(|_| {
            let x0 = rng.random_range(a..b);
            let x: Vec<f64> = model.periods().iter().map(|&l| rng.random_range(0.0..l)).collect();
            let dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            (x0, x, dir, rng.random_range(0.0..MAX_TILT))
        })
        .collect();
    let values = par::try_map(n_samples, |k| {
        let (x0, x, dir, speed) = &draws[k];
        let w = Vect::from_slice(dir);
        let len = model.sigma(*x0, x).bilinear(&w, &w).sqrt();
        let w = if len > 0.0 { w.scaled(speed / len) } else { Vect::zeros(d) };
        let nu = unit_timelike(model, *x0, x, &w)?;
        ambient_ricci_contraction(model, *x0, x, &nu)
    })?;
    let (k, worst) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
    Ok(CheckReport::new("timelike_convergence", worst >= -TIMELIKE_TOL, worst, TIMELIKE_TOL)
        .at(draws[k].0, draws[k].1.clone())
        .with_samples(n_samples)
        .with_seed(seed))
}

fn inf_over_probes(model: &SpacetimeModel, x0: f64, rate: bool) -> Result<(f64, Vec<f64>)> {
    let mut best = (f64::INFINITY, vec![]);
    for x in spatial_probes(model.periods()) {
        let sg = slice_geometry(model, x0, &x)?;
        let v = if rate { sg.conf * sg.hbar_trace } else { sg.hbar_trace };
        if v < best.0 {
            best = (v, x);
        }
    }
    Ok(best)
}

/// `inf_x H-bar` along `x0_seq`; passes iff the last value exceeds `threshold`
/// and the profile is nondecreasing once it has turned positive.
pub fn probe_mean_curvature_barrier(model: &SpacetimeModel, x0_seq: &[f64], threshold: f64) -> Result<CheckReport> {
    if x0_seq.is_empty() || x0_seq.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ImcfError::Precondition("barrier probe needs a nonempty increasing sequence".into()));
    }
    let profile = par::try_map(x0_seq.len(), |k| inf_over_probes(model, x0_seq[k], false))?;
    let values: Vec<f64> = profile.iter().map(|p| p.0).collect();
    let crossover = values.iter().position(|&v| v > 0.0);
    let monotone = match crossover {
        Some(c) => values[c..].windows(2).all(|w| w[1] >= w[0]),
        None => false,
    };
    let last = *values.last().expect("nonempty");
    let passed = last > threshold && monotone;
    let mut report = CheckReport::new("mean_curvature_barrier", passed, last, threshold)
        .at(*x0_seq.last().expect("nonempty"), profile.last().expect("nonempty").1.clone())
        .with_samples(x0_seq.len())
        .detail("monotone_beyond_crossover", if monotone { 1.0 } else { 0.0 });
    if let Some(c) = crossover {
        report = report.detail("crossover_x0", x0_seq[c]);
    }
    report.profile = x0_seq.iter().zip(&values).map(|(&a, &b)| [a, b]).collect();
    Ok(report)
}

/// The measured rate `x0 -> inf_x e^psi H-bar(x0, x)` over the probe lattice, evaluated on demand.
pub fn measured_rate(model: &SpacetimeModel) -> Phi {
    let m = model.clone();
    Arc::new(move |x0| inf_over_probes(&m, x0, true).map(|r| r.0).unwrap_or(f64::NAN))
}

/// Pointwise strong volume decay inequality `e^psi H-bar >= phi` on `n_tau` samples of `[tau0, b)`.
///
/// `n_x` probe points per spatial axis. Divergence of `int phi` is not decided;
/// the running integral is reported in the profile.
pub fn check_strong_volume_decay(
    model: &SpacetimeModel,
    tau0: f64,
    b: f64,
    phi: &Phi,
    n_tau: usize,
    n_x: usize,
) -> Result<(CheckReport, DecayProfile)> {
    let (lo, hi) = model.x0_range();
    if !(tau0 > lo && tau0 < b && b <= hi) || n_tau < 2 || n_x == 0 {
        return Err(ImcfError::Precondition(format!(
            "need lo < tau0 < b <= hi ({lo} < {tau0} < {b} <= {hi}), n_tau >= 2, n_x >= 1"
        )));
    }
    let h = (b - tau0) / n_tau as f64;
    let taus: Vec<f64> = (0..n_tau).map(|k| tau0 + k as f64 * h).collect();
    let mut phis = Vec::with_capacity(n_tau);
    for &t in &taus {
        let p = phi(t);
        if !(p > 0.0 && p.is_finite()) {
            return Err(ImcfError::NotPositive { at: t, value: p });
        }
        phis.push(p);
    }
    let d = model.dim();
    let lattice: Vec<Vec<f64>> = (0..n_x.pow(d as u32))
        .map(|mut idx| {
            let mut x = vec![0.0; d];
            for k in (0..d).rev() {
                x[k] = model.periods()[k] * (idx % n_x) as f64 / n_x as f64;
                idx /= n_x;
            }
            x
        })
        .collect();
    let infs = par::try_map(n_tau, |k| {
        let mut best = (f64::INFINITY, 0usize);
        for (j, x) in lattice.iter().enumerate() {
            let sg = slice_geometry(model, taus[k], x)?;
            let v = sg.conf * sg.hbar_trace;
            if v < best.0 {
                best = (v, j);
            }
        }
        Ok::<_, ImcfError>(best)
    })?;
    let margins: Vec<f64> = infs.iter().zip(&phis).map(|(i, p)| i.0 - p).collect();
    let (k, worst) = margins
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
    let partial = cumulative_simpson(&phis, h);
    let report = CheckReport::new("strong_volume_decay", worst >= -DECAY_TOL, worst, DECAY_TOL)
        .at(taus[k], lattice[infs[k].1].clone())
        .with_samples(n_tau * lattice.len())
        .detail("partial_integral_final", *partial.last().expect("n_tau >= 2"));
    let profile = DecayProfile {
        tau0,
        b,
        tau_samples: taus,
        inf_e_h: infs.iter().map(|i| i.0).collect(),
        phi: phis,
        partial_integrals: partial,
    };
    Ok((report, profile))
}

fn log_det_metric(model: &SpacetimeModel, x0: f64, x: &[f64]) -> Result<f64> {
    model.check_x0(x0)?;
    let det = model.sigma(x0, x).cholesky()?.det();
    Ok(2.0 * model.dim() as f64 * model.psi(x0, x) + det.ln())
}

/// Compares `log g(tau0) - log g(tau)` with `int_{tau0}^{tau} 2 e^psi H-bar` at each spatial sample.
///
/// The worst relative gap is the verdict; the same gap for the integral without
/// the factor 2 is reported as `literal_form_residual`.
pub fn volume_identity_residual(model: &SpacetimeModel, tau0: f64, tau: f64, x_samples: &[Vec<f64>]) -> Result<CheckReport> {
    if x_samples.is_empty() {
        return Err(ImcfError::Precondition("need at least one spatial sample".into()));
    }
    model.check_x0(tau0)?;
    model.check_x0(tau)?;
    let rows = par::try_map(x_samples.len(), |k| {
        let x = &x_samples[k];
        let lhs = log_det_metric(model, tau0, x)? - log_det_metric(model, tau, x)?;
        let rate = |s: f64| slice_geometry(model, s, x).map(|sg| sg.conf * sg.hbar_trace).unwrap_or(f64::NAN);
        let integral = simpson(rate, tau0, tau, IDENTITY_NODES);
        if !integral.is_finite() {
            return Err(ImcfError::Domain(format!("rate not finite on [{tau0}, {tau}] at x = {x:?}")));
        }
        let scale = lhs.abs();
        let rel = |rhs: f64| if scale > 0.0 { (lhs - rhs).abs() / scale } else { (lhs - rhs).abs() };
        Ok::<_, ImcfError>((rel(2.0 * integral), rel(integral)))
    })?;
    let (k, worst) = rows
        .iter()
        .map(|r| r.0)
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let literal = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(CheckReport::new("volume_identity", worst <= IDENTITY_TOL, worst, IDENTITY_TOL)
        .at(tau, x_samples[k].clone())
        .with_samples(x_samples.len())
        .detail("literal_form_residual", literal)
        .detail("tau0", tau0))
}

fn worst_over_records(
    trace: &FlowTrace,
    name: &str,
    tol: f64,
    f: impl Fn(&crate::flow::FlowRecord) -> Result<f64>,
) -> Result<CheckReport> {
    let mut worst = (0.0f64, 0.0f64);
    for r in &trace.records {
        let v = f(r)?;
        if !(v <= worst.0) {
            worst = (v, r.t);
        }
    }
    Ok(CheckReport::new(name, worst.0 <= tol, worst.0, tol)
        .at(worst.1, vec![])
        .with_samples(trace.records.len()))
}

/// `max | |M(t)| / |M_0| - e^{-t} |` over the records.
pub fn check_volume_law(trace: &FlowTrace, tol: f64) -> Result<CheckReport> {
    let v0 = trace.records.first().map(|r| r.volume).unwrap_or(f64::NAN);
    worst_over_records(trace, "volume_law", tol, |r| Ok((r.volume / v0 - (-r.t).exp()).abs()))
}

/// `max | |M(tau)| - |M_0| (1 - tau)^d | / |M_0|` over the records.
pub fn check_tau_law(trace: &FlowTrace, tol: f64) -> Result<CheckReport> {
    let v0 = trace.records.first().map(|r| r.volume).unwrap_or(f64::NAN);
    let d = trace.d as i32;
    worst_over_records(trace, "tau_law", tol, |r| {
        let tau = tau_of_t(r.t, trace.d)?;
        Ok((r.volume - v0 * (1.0 - tau).powi(d)).abs() / v0)
    })
}

/// `H_min(t) e^{-t/d} >= (1 - slack) inf_{M_0} H` at every record; reports the worst ratio shortfall.
pub fn check_mean_curvature_growth(trace: &FlowTrace, slack: f64) -> Result<CheckReport> {
    let d = trace.d as f64;
    let c0 = trace.c0;
    let report = worst_over_records(trace, "mean_curvature_growth", slack, |r| {
        Ok(1.0 - r.h_min * (-r.t / d).exp() / c0)
    })?;
    Ok(report.detail("c0", c0))
}
