use crate::config::{RunConfig, SnapshotFormat};
use crate::output::{self, Header};
use crate::{CliError, Outcome, EXIT_CHECK_FAILED, EXIT_NUMERICAL, EXIT_OK};
use imcf_core::analysis::{
    check_mean_curvature_growth, check_strong_volume_decay, check_tau_law, check_timelike_convergence,
    check_volume_law, homogeneous_oracle, lifespan_bound_check, measured_rate, probe_mean_curvature_barrier,
    volume_identity_residual, CheckReport,
};
use imcf_core::flow::{run, FlowTrace, StopReason};
use imcf_core::geometry::{compute_geometry_with, GeometryOptions, GraphState};
use imcf_core::grid::{PeriodicGrid, ScalarField};
use imcf_core::spacetime::{Phi, SpacetimeModel};
use imcf_core::ImcfError;
use std::path::Path;
use std::sync::Arc;

const DEFAULT_TIMELIKE_SAMPLES: usize = 1000;
const DEFAULT_BARRIER_COUNT: usize = 11;
const DEFAULT_DECAY_N_TAU: usize = 200;
const DEFAULT_DECAY_N_X: usize = 4;
const DEFAULT_IDENTITY_SAMPLES: usize = 4;
const DEFAULT_VOLUME_TOL: f64 = 1e-3;
const DEFAULT_TAU_TOL: f64 = 1e-3;
const DEFAULT_GROWTH_SLACK: f64 = 1e-2;
const DEFAULT_ORACLE_TOL: f64 = 1e-10;
const DEFAULT_ORACLE_MAX_DEVIATION: f64 = 1e-6;
const DEFAULT_LIFESPAN_CURVES: usize = 16;

fn header(cfg: &RunConfig) -> Header {
    Header::new(&cfg.config_hash, cfg.seed, cfg.model.descriptor())
}

fn verdict(reports: &[CheckReport]) -> i32 {
    if reports.iter().all(|r| r.passed) {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

fn report_line(r: &CheckReport) -> String {
    format!(
        "{:<24} {} worst = {:e} (tolerance {:e})",
        r.name,
        if r.passed { "PASS" } else { "FAIL" },
        r.worst_value,
        r.tolerance
    )
}

fn trace_reports(cfg: &RunConfig, trace: &FlowTrace) -> Result<Vec<CheckReport>, CliError> {
    let s = &cfg.file.checks.trace;
    let mut out = vec![CheckReport::new(
        "flow_completion",
        !trace.stop_reason.is_numerical_failure(),
        trace.final_state.t,
        cfg.flow.t_max,
    )
    .with_samples(trace.records.len())
    .detail("steps", trace.steps as f64)
    .detail("c0", trace.c0)
    .detail("lifespan_c", trace.lifespan_c)];
    if s.enabled.unwrap_or(true) {
        out.push(check_volume_law(trace, s.volume_tol.unwrap_or(DEFAULT_VOLUME_TOL))?);
        out.push(check_tau_law(trace, s.tau_tol.unwrap_or(DEFAULT_TAU_TOL))?);
        out.push(check_mean_curvature_growth(trace, s.growth_slack.unwrap_or(DEFAULT_GROWTH_SLACK))?);
    }
    Ok(out)
}

fn stop_name(r: StopReason) -> &'static str {
    match r {
        StopReason::Completed => "completed",
        StopReason::DomainBoundary => "domain_boundary",
        StopReason::HFloor => "h_floor",
        StopReason::VtildeAbort => "vtilde_abort",
        StopReason::SpacelikeMargin => "spacelike_margin",
    }
}

/// Flows the configured initial data and writes the trace, snapshots and trace checks.
pub fn cmd_run(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let trace = run(&cfg.model, cfg.u0.clone(), &cfg.flow)?;
    let h = header(cfg);
    let mut files = vec![output::write_trace(out_dir, &h, &trace.records)?];
    if cfg.write_snapshots {
        let dir = out_dir.join("snapshots");
        for (i, s) in trace.snapshots.iter().enumerate() {
            match cfg.snapshot_format {
                SnapshotFormat::Binary => output::write_snapshot_bin(&dir, i, &h, s)?,
                SnapshotFormat::Csv => output::write_snapshot_csv(&dir, i, &h, s)?,
            }
        }
        files.push(dir);
    }
    let reports = trace_reports(cfg, &trace)?;
    let path = out_dir.join("reports.jsonl");
    output::write_reports(&path, &h, &reports)?;
    files.push(path);

    let mut summary = vec![format!(
        "flow stopped ({}) at t = {} after {} steps",
        stop_name(trace.stop_reason),
        trace.final_state.t,
        trace.steps
    )];
    if let Some(d) = &trace.stop_detail {
        summary.push(format!("  {d}"));
    }
    summary.extend(reports.iter().map(report_line));
    let exit_code = if trace.stop_reason.is_numerical_failure() { EXIT_NUMERICAL } else { verdict(&reports) };
    Ok(Outcome { exit_code, summary, files })
}

/// The sample window pulled slightly inward; model domains are open.
fn inner_window(model: &SpacetimeModel) -> (f64, f64) {
    let (lo, hi) = model.sample_window();
    let inset = 1e-6 * (hi - lo);
    (lo + inset, hi - inset)
}

fn barrier_sequence(cfg: &RunConfig) -> Vec<f64> {
    let b = &cfg.file.checks.barrier;
    if let Some(xs) = &b.x0 {
        return xs.clone();
    }
    let (lo, hi) = inner_window(&cfg.model);
    let (a, z) = (b.x0_min.unwrap_or(lo), b.x0_max.unwrap_or(hi));
    let n = b.count.unwrap_or(DEFAULT_BARRIER_COUNT);
    (0..n).map(|k| a + (z - a) * k as f64 / (n - 1) as f64).collect()
}

/// Low-discrepancy spatial points, one irrational rotation per axis.
fn spatial_samples(periods: &[f64], n: usize) -> Vec<Vec<f64>> {
    const STEPS: [f64; 3] = [0.618_033_988_749_894_8, 0.414_213_562_373_095_1, 0.732_050_807_568_877_2];
    (0..n)
        .map(|k| periods.iter().enumerate().map(|(a, l)| l * ((k as f64 * STEPS[a]).fract())).collect())
        .collect()
}

/// Model-level checkers; nothing is flowed.
pub fn cmd_check(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    let s = &cfg.file.checks;
    let model = &cfg.model;
    let h = header(cfg);
    let mut reports = Vec::new();
    let mut files = Vec::new();
    if s.timelike.enabled.unwrap_or(true) {
        let n = s.timelike.samples.unwrap_or(DEFAULT_TIMELIKE_SAMPLES);
        reports.push(check_timelike_convergence(model, n, cfg.seed)?);
    }
    if s.barrier.enabled.unwrap_or(true) {
        let r = probe_mean_curvature_barrier(model, &barrier_sequence(cfg), cfg.barrier_threshold())?;
        let path = out_dir.join("barrier_profile.csv");
        let rows: Vec<Vec<f64>> = r.profile.iter().map(|p| p.to_vec()).collect();
        output::write_table(&path, &h, "barrier_profile", &["x0", "inf_H_bar"], &rows)?;
        files.push(path);
        reports.push(r);
    }
    if s.decay.enabled.unwrap_or(false) {
        let d = &s.decay;
        let (_, hi) = model.x0_range();
        let (wlo, whi) = inner_window(model);
        let tau0 = d.tau0.unwrap_or(wlo);
        let b = d.b.unwrap_or(if hi.is_finite() { hi } else { whi });
        let scale = d.phi_scale.unwrap_or(1.0);
        let phi: Phi = match d.phi.as_deref() {
            Some("constant") => {
                let v = d.phi_value.expect("validated") * scale;
                Arc::new(move |_| v)
            }
            _ => {
                let rate = measured_rate(model);
                Arc::new(move |x0| scale * rate(x0))
            }
        };
        let (mut r, prof) = check_strong_volume_decay(
            model,
            tau0,
            b,
            &phi,
            d.n_tau.unwrap_or(DEFAULT_DECAY_N_TAU),
            d.n_x.unwrap_or(DEFAULT_DECAY_N_X),
        )?;
        if let Some(flag) = d.analytic_divergence {
            r = r.detail("analytic_divergence", if flag { 1.0 } else { 0.0 });
        }
        let path = out_dir.join("decay_profile.csv");
        let rows: Vec<Vec<f64>> = (0..prof.tau_samples.len())
            .map(|k| vec![prof.tau_samples[k], prof.inf_e_h[k], prof.phi[k], prof.partial_integrals[k]])
            .collect();
        output::write_table(&path, &h, "decay_profile", &["tau", "inf_e_psi_H_bar", "phi", "partial_integral"], &rows)?;
        files.push(path);
        reports.push(r);
    }
    if s.identity.enabled.unwrap_or(false) {
        let i = &s.identity;
        let (wlo, whi) = inner_window(model);
        let xs = spatial_samples(model.periods(), i.samples.unwrap_or(DEFAULT_IDENTITY_SAMPLES));
        reports.push(volume_identity_residual(model, i.tau0.unwrap_or(wlo), i.tau.unwrap_or(whi), &xs)?);
    }
    let path = out_dir.join("reports.jsonl");
    output::write_reports(&path, &h, &reports)?;
    files.push(path);
    let mut summary: Vec<String> = reports.iter().map(report_line).collect();
    if reports.is_empty() {
        summary.push("no checks enabled".into());
    }
    Ok(Outcome { exit_code: verdict(&reports), summary, files })
}

struct Comparison {
    n: usize,
    h: f64,
    steps: usize,
    t_end: f64,
    max_dev: f64,
    rows: Vec<Vec<f64>>,
}

fn compare_at(cfg: &RunConfig, n: usize, u0: f64, tol: f64) -> Result<Comparison, CliError> {
    let d = cfg.grid.dim();
    let grid = Arc::new(PeriodicGrid::new(&vec![n; d], cfg.grid.periods())?);
    let mut flow = cfg.flow.clone();
    flow.residuals = false;
    flow.snapshot_every = 0.0;
    flow.record_every = 1;
    let trace = run(&cfg.model, ScalarField::constant(grid.clone(), u0), &flow)?;
    if trace.stop_reason.is_numerical_failure() {
        return Err(ImcfError::NumericalBlowup(format!(
            "PDE run at N = {n} stopped: {}",
            trace.stop_detail.clone().unwrap_or_default()
        ))
        .into());
    }
    let t_end = trace.final_state.t;
    let sol = if t_end > 0.0 { Some(homogeneous_oracle(&cfg.model, u0, t_end, tol)?) } else { None };
    let mut rows = Vec::new();
    let mut max_dev = 0.0f64;
    for r in &trace.records {
        let ode = match &sol {
            Some(s) if r.t <= s.t_span().1 => s.eval(r.t)?,
            Some(_) => continue,
            None => u0,
        };
        let dev = (r.u_max - ode).abs().max((r.u_min - ode).abs());
        max_dev = max_dev.max(dev);
        rows.push(vec![r.t, r.u_min, r.u_max, ode, dev]);
    }
    Ok(Comparison { n, h: grid.h_min(), steps: trace.steps, t_end, max_dev, rows })
}

/// PDE against the homogeneous ODE reference, over one or more resolutions.
pub fn cmd_oracle_compare(cfg: &RunConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    if !cfg.is_homogeneous_data() {
        return Err(ImcfError::Precondition(
            "oracle comparison needs spatially constant initial data (homogeneous reference)".into(),
        )
        .into());
    }
    let u0 = cfg.u0.get(0);
    let tol = cfg.file.oracle.tol.unwrap_or(DEFAULT_ORACLE_TOL);
    let limit = cfg.file.oracle.max_deviation.unwrap_or(DEFAULT_ORACLE_MAX_DEVIATION);
    let resolutions = cfg.file.oracle.resolutions.clone().unwrap_or_else(|| vec![cfg.grid.shape()[0]]);
    let mut table = Vec::new();
    let mut last: Option<Comparison> = None;
    for &n in &resolutions {
        let c = compare_at(cfg, n, u0, tol)?;
        let order = match &last {
            Some(p) if p.max_dev > 0.0 && c.max_dev > 0.0 => (p.max_dev / c.max_dev).ln() / (p.h / c.h).ln(),
            _ => f64::NAN,
        };
        table.push(vec![c.n as f64, c.h, c.steps as f64, c.t_end, c.max_dev, order]);
        last = Some(c);
    }
    let finest = last.expect("resolutions are nonempty");
    let h = header(cfg);
    let table_path = out_dir.join("oracle_compare.csv");
    output::write_table(&table_path, &h, "oracle_compare", &["n", "h", "steps", "t_end", "max_deviation", "observed_order"], &table)?;
    let trace_path = out_dir.join("oracle_trace.csv");
    output::write_table(&trace_path, &h, "oracle_trace", &["t", "u_min", "u_max", "u_ode", "deviation"], &finest.rows)?;
    let report = CheckReport::new("oracle_compare", finest.max_dev <= limit, finest.max_dev, limit)
        .with_samples(finest.rows.len())
        .detail("n", finest.n as f64)
        .detail("t_end", finest.t_end)
        .detail("ode_tol", tol);
    let reports_path = out_dir.join("reports.jsonl");
    output::write_reports(&reports_path, &h, std::slice::from_ref(&report))?;
    let mut summary: Vec<String> = table
        .iter()
        .map(|r| format!("N = {:<6} max |u_pde - u_ode| = {:e}  order {:.3}", r[0], r[4], r[5]))
        .collect();
    summary.push(report_line(&report));
    Ok(Outcome { exit_code: verdict(std::slice::from_ref(&report)), summary, files: vec![table_path, trace_path, reports_path] })
}

fn initial_only_trace(cfg: &RunConfig) -> Result<FlowTrace, CliError> {
    let state = GraphState::new(0.0, cfg.u0.clone());
    let opts = GeometryOptions { order: cfg.flow.fd_order, eps_space: cfg.flow.eps_space };
    let snap = compute_geometry_with(&cfg.model, &state, opts)?;
    let c0 = snap.h_min();
    if !(c0 > 0.0) {
        return Err(ImcfError::InitialDataInvalid(format!("mean curvature of the initial graph must be positive, found H = {c0}")).into());
    }
    let d = cfg.model.dim();
    Ok(FlowTrace {
        records: Vec::new(),
        snapshots: vec![state.clone()],
        c0,
        lifespan_c: d as f64 / c0,
        d,
        steps: 0,
        stop_reason: StopReason::Completed,
        stop_detail: None,
        final_state: state,
    })
}

/// Remaining-lifetime bound at flow time `t_eval`.
pub fn cmd_lifespan(cfg: &RunConfig, out_dir: &Path, t_eval: f64) -> Result<Outcome, CliError> {
    if !(t_eval >= 0.0 && t_eval.is_finite()) {
        return Err(CliError::Usage(format!("--t must be a finite non-negative time, got {t_eval}")));
    }
    let trace = if t_eval == 0.0 {
        initial_only_trace(cfg)?
    } else {
        let mut flow = cfg.flow.clone();
        flow.t_max = t_eval;
        flow.residuals = false;
        let trace = run(&cfg.model, cfg.u0.clone(), &flow)?;
        if trace.stop_reason.is_numerical_failure() {
            return Err(ImcfError::NumericalBlowup(trace.stop_detail.clone().unwrap_or_default()).into());
        }
        if trace.stop_reason != StopReason::Completed {
            return Err(ImcfError::Precondition(format!(
                "the flow ends at t = {} before t = {t_eval}",
                trace.final_state.t
            ))
            .into());
        }
        trace
    };
    let curves = cfg.file.lifespan.curves.unwrap_or(DEFAULT_LIFESPAN_CURVES);
    let report = lifespan_bound_check(&cfg.model, &trace, t_eval, curves, cfg.seed)?;
    let path = out_dir.join("lifespan.jsonl");
    output::write_reports(&path, &header(cfg), std::slice::from_ref(&report))?;
    let summary = vec![
        report_line(&report),
        format!(
            "  max length {:e}, bound c (1 - tau) = {:e}",
            report.details.get("max_length").copied().unwrap_or(f64::NAN),
            report.details.get("bound").copied().unwrap_or(f64::NAN)
        ),
    ];
    Ok(Outcome { exit_code: verdict(std::slice::from_ref(&report)), summary, files: vec![path] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spatial_samples_stay_in_the_box() {
        let xs = spatial_samples(&[1.0, 2.0], 50);
        assert_eq!(xs.len(), 50);
        assert!(xs.iter().all(|x| x[0] >= 0.0 && x[0] < 1.0 && x[1] >= 0.0 && x[1] < 2.0));
    }
}
