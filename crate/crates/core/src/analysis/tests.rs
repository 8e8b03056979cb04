use super::*;
use crate::flow::{run, FlowConfig};
use crate::grid::{PeriodicGrid, ScalarField};
use crate::spacetime::{make_exp_rw, make_minkowski_slab, make_sads_interior, make_sads_region, make_warped_rw, Phi};
use std::f64::consts::{FRAC_1_SQRT_2, LN_2, TAU};
use std::sync::Arc;

fn sads() -> crate::spacetime::SpacetimeModel {
    make_sads_interior(1, -1.0, 1.0, 0).unwrap()
}

fn constant(c: f64) -> Phi {
    Arc::new(move |_| c)
}

fn homogeneous_trace(t_max: f64, snapshot_every: f64) -> FlowTrace {
    let m = make_exp_rw(1.0, 1, None).unwrap();
    let mut cfg = FlowConfig::new(t_max);
    cfg.record_every = 100;
    cfg.snapshot_every = snapshot_every;
    cfg.residuals = false;
    let grid = Arc::new(PeriodicGrid::uniform(1, 32).unwrap());
    run(&m, ScalarField::constant(grid, 0.0), &cfg).unwrap()
}

use crate::flow::FlowTrace;

#[test]
fn tau_examples() {
    assert_eq!(tau_of_t(0.0, 3).unwrap(), 0.0);
    assert!((tau_of_t(LN_2, 1).unwrap() - 0.5).abs() < 1e-15);
    for k in 0..=999 {
        let tau = k as f64 * 1e-3;
        for d in 1..=3 {
            let back = tau_of_t(t_of_tau(tau, d).unwrap(), d).unwrap();
            assert!((back - tau).abs() <= 1e-12, "{tau} {d}");
        }
    }
    assert!(matches!(tau_of_t(-1.0, 1), Err(ImcfError::Range(_))));
    assert!(matches!(t_of_tau(1.0, 1), Err(ImcfError::Range(_))));
}

#[test]
fn timelike_convergence_examples() {
    let flat = make_minkowski_slab(2, -1.0, 1.0, None).unwrap();
    let r = check_timelike_convergence(&flat, 200, 1).unwrap();
    assert!(r.passed && r.worst_value == 0.0);

    let r = check_timelike_convergence(&sads(), 500, 2).unwrap();
    assert!(r.passed && (r.worst_value - 2.0).abs() <= 1e-6, "{r:?}");

    for d in 1..=3 {
        assert!(check_timelike_convergence(&make_exp_rw(1.0, d, None).unwrap(), 300, 3).unwrap().passed);
    }

    let flipped = make_sads_region(1, 1.0, 1.0, 0, 1.0, (0.001, 0.999), None).unwrap();
    let r = check_timelike_convergence(&flipped, 100, 4).unwrap();
    assert!(!r.passed && (r.worst_value + 2.0).abs() < 1e-9, "{r:?}");
}

#[test]
fn timelike_reports_are_reproducible() {
    let m = make_warped_rw(1.0, 0.1, 2, None).unwrap();
    let a = check_timelike_convergence(&m, 64, 9).unwrap();
    let b = check_timelike_convergence(&m, 64, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.seed, Some(9));
}

#[test]
fn barrier_examples() {
    let m = make_exp_rw(1.0, 1, None).unwrap();
    let xs: Vec<f64> = (0..=10).map(f64::from).collect();
    let r = probe_mean_curvature_barrier(&m, &xs, DEFAULT_BARRIER_THRESHOLD).unwrap();
    assert!(r.passed);
    for [x0, v] in &r.profile {
        assert!((v - x0.exp()).abs() < 1e-9 * x0.exp());
    }

    let flat = make_minkowski_slab(1, -1.0, 11.0, None).unwrap();
    let r = probe_mean_curvature_barrier(&flat, &xs, DEFAULT_BARRIER_THRESHOLD).unwrap();
    assert!(!r.passed && r.worst_value == 0.0);

    let s = sads();
    let xs: Vec<f64> = (0..=60).map(|k| 0.002 + k as f64 * (0.997 - 0.002) / 60.0).collect();
    let r = probe_mean_curvature_barrier(&s, &xs, DEFAULT_BARRIER_THRESHOLD).unwrap();
    assert!(r.passed, "{r:?}");
    assert!(r.profile[0][1] < 0.0, "negative near the horizon");
    assert!((r.details["crossover_x0"] - (1.0 - FRAC_1_SQRT_2)).abs() < 0.02);

    assert!(probe_mean_curvature_barrier(&m, &[1.0, 0.5], 1.0).is_err());
}

#[test]
fn strong_volume_decay_examples() {
    let m = make_exp_rw(1.0, 1, None).unwrap();
    let (r, prof) = check_strong_volume_decay(&m, 0.0, 5.0, &constant(1.0), 101, 4).unwrap();
    assert!(r.passed && r.worst_value.abs() <= 1e-12, "{r:?}");
    for (t, i) in prof.tau_samples.iter().zip(&prof.partial_integrals) {
        assert!((i - t).abs() < 1e-12);
    }
    assert!(prof.partial_integrals.windows(2).all(|w| w[1] >= w[0]));

    let (r, _) = check_strong_volume_decay(&m, 0.0, 5.0, &constant(2.0), 11, 2).unwrap();
    assert!(!r.passed && (r.worst_value + 1.0).abs() < 1e-12);

    assert!(matches!(
        check_strong_volume_decay(&m, 0.0, 5.0, &constant(0.0), 11, 2),
        Err(ImcfError::NotPositive { .. })
    ));

    let m2 = make_exp_rw(0.5, 2, None).unwrap();
    let (r, _) = check_strong_volume_decay(&m2, -1.0, 3.0, &constant(1.0), 50, 3).unwrap();
    assert!(r.passed && r.worst_value.abs() <= 1e-12);
}

#[test]
fn strong_volume_decay_on_sads_with_half_measured_rate() {
    let s = sads();
    let rate = measured_rate(&s);
    let half: Phi = Arc::new(move |x0| 0.5 * rate(x0));
    let lo = 1.0 - FRAC_1_SQRT_2 + 1e-3;
    let (r, prof) = check_strong_volume_decay(&s, lo, 0.999, &half, 200, 4).unwrap();
    assert!(r.passed, "{r:?}");
    assert!(prof.partial_integrals.last().unwrap() > &0.0);
}

#[test]
fn volume_identity_examples() {
    let xs = vec![vec![0.0], vec![1.0], vec![4.0]];
    let m = make_exp_rw(1.0, 1, None).unwrap();
    let r = volume_identity_residual(&m, 0.0, 2.0, &xs).unwrap();
    assert!(r.passed && r.worst_value < 1e-12, "{r:?}");
    assert!((r.details["literal_form_residual"] - 0.5).abs() < 1e-12);

    let r = volume_identity_residual(&m, 1.0, 1.0, &xs).unwrap();
    assert!(r.passed && r.worst_value == 0.0);

    let m2 = make_exp_rw(1.0, 2, None).unwrap();
    let r = volume_identity_residual(&m2, 0.5, 1.5, &[vec![0.0, 0.0], vec![1.0, 2.0]]).unwrap();
    assert!(r.passed && r.worst_value < 1e-12);

    let w = make_warped_rw(1.0, 0.2, 2, None).unwrap();
    let r = volume_identity_residual(&w, 0.0, 1.0, &[vec![0.3, 0.0], vec![2.0, 1.0]]).unwrap();
    assert!(r.passed, "{r:?}");

    let s = sads();
    let r = volume_identity_residual(&s, 0.35, 0.9, &[vec![0.0, 0.0]]).unwrap();
    assert!(r.passed, "{r:?}");

    assert!(volume_identity_residual(&s, 0.35, 1.5, &[vec![0.0, 0.0]]).is_err());
}

#[test]
fn lifespan_is_tight_on_exp_rw() {
    let m = make_exp_rw(1.0, 1, None).unwrap();
    let tr = homogeneous_trace(2.0, 1.0);
    for t in [0.0, 1.0, 2.0] {
        let r = lifespan_bound_check(&m, &tr, t, 16, 5).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.worst_value >= 1.0 - 1e-6 && r.worst_value <= 1.0 + 1e-3, "{r:?}");
        assert!(r.details["max_tilted_length"] < r.details["max_vertical_length"]);
    }
    let r0 = lifespan_bound_check(&m, &tr, 0.0, 1, 5).unwrap();
    assert!((r0.details["bound"] - tr.lifespan_c).abs() < 1e-15);
    assert!(lifespan_bound_check(&m, &tr, 0.5, 4, 5).is_err());
}

#[test]
fn time_function_examples() {
    let tr = homogeneous_trace(1.0, 0.1);
    let t = time_function_lookup(&tr, 0.5, &[1.0]).unwrap();
    assert!((t - 0.5).abs() < 1e-6, "{t}");
    let a = time_function_lookup(&tr, 0.25, &[1.0]).unwrap();
    let b = time_function_lookup(&tr, 0.75, &[1.0]).unwrap();
    assert!(a < b);
    assert!(matches!(time_function_lookup(&tr, -0.1, &[1.0]), Err(ImcfError::OutOfFoliation(_))));
    assert!(matches!(time_function_lookup(&tr, 1.1, &[1.0]), Err(ImcfError::OutOfFoliation(_))));
}

#[test]
fn homogeneous_oracle_examples() {
    let m = make_exp_rw(1.0, 1, None).unwrap();
    let sol = homogeneous_oracle(&m, 0.0, 3.0, 1e-10).unwrap();
    for k in 0..=300 {
        let t = 0.01 * k as f64;
        assert!((sol.eval(t).unwrap() - t).abs() <= 1e-10);
    }
    let m2 = make_exp_rw(0.5, 2, None).unwrap();
    let sol = homogeneous_oracle(&m2, 0.3, 2.0, 1e-10).unwrap();
    assert!((sol.eval(2.0).unwrap() - 2.3).abs() <= 1e-10);
}

#[test]
fn homogeneous_oracle_on_sads_self_converges() {
    let s = sads();
    let u0 = 0.4;
    let coarse = homogeneous_oracle(&s, u0, 50.0, 1e-8).unwrap();
    let fine = homogeneous_oracle(&s, u0, 50.0, 1e-10).unwrap();
    assert!(coarse.truncated && fine.truncated);
    let end = coarse.t_span().1.min(fine.t_span().1);
    assert!(end.is_finite() && end < 50.0);
    assert!(fine.final_value() > 0.998, "{}", fine.final_value());
    let mut prev = u0;
    for k in 1..=400 {
        let t = end * k as f64 / 400.0;
        let (a, b) = (coarse.eval(t).unwrap(), fine.eval(t).unwrap());
        assert!((a - b).abs() <= 1e-7, "t = {t}: {a} vs {b}");
        assert!(b > prev);
        prev = b;
    }
}

#[test]
fn homogeneous_oracle_preconditions() {
    let w = make_warped_rw(1.0, 0.1, 1, None).unwrap();
    assert!(matches!(homogeneous_oracle(&w, 0.0, 1.0, 1e-10), Err(ImcfError::Precondition(_))));
    assert!(matches!(homogeneous_oracle(&sads(), 0.1, 1.0, 1e-10), Err(ImcfError::NonPositiveH { .. })));
}

#[test]
fn residuals_on_homogeneous_runs() {
    let m = make_exp_rw(1.0, 1, None).unwrap();
    let grid = Arc::new(PeriodicGrid::uniform(1, 64).unwrap());
    let worst = |cfl: f64| {
        let mut cfg = FlowConfig::new(0.5);
        cfg.cfl = cfl;
        let tr = run(&m, ScalarField::constant(grid.clone(), 0.0), &cfg).unwrap();
        let rg = tr.records.iter().map(|r| r.residual_g).filter(|v| v.is_finite()).fold(0.0, f64::max);
        let rh = tr.records.iter().map(|r| r.residual_hinv).filter(|v| v.is_finite()).fold(0.0, f64::max);
        (rg, rh)
    };
    let (g1, h1) = worst(0.4);
    let (g2, h2) = worst(0.2);
    assert!(g1 < 1e-2 && h1 < 1e-4 && h2 < 1e-4, "{g1} {h1} {h2}");
    assert!((g2 / g1 - 0.5).abs() <= 0.1, "{g1} {g2}");
}

#[test]
fn trace_checks_on_homogeneous_run() {
    let tr = homogeneous_trace(3.0, 0.0);
    assert!(check_volume_law(&tr, 1e-6).unwrap().passed);
    assert!(check_tau_law(&tr, 1e-6).unwrap().passed);
    let g = check_mean_curvature_growth(&tr, 1e-2).unwrap();
    assert!(g.passed && g.worst_value.abs() < 1e-9, "{g:?}");
    let _ = TAU;
}

