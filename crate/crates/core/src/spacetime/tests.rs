use super::*;
use crate::linalg::{Mat, Vect};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::LN_2;

fn exp_rw(d: usize) -> SpacetimeModel {
    make_exp_rw(1.0, d, None).unwrap()
}

fn sads() -> SpacetimeModel {
    make_sads_interior(1, -1.0, 1.0, 0).unwrap()
}

fn builtins() -> Vec<SpacetimeModel> {
    vec![
        make_minkowski_slab(2, -1.0, 1.0, None).unwrap(),
        exp_rw(1),
        exp_rw(3),
        make_warped_rw(0.7, 0.2, 2, None).unwrap(),
        sads(),
    ]
}

fn random_point(model: &SpacetimeModel, rng: &mut ChaCha8Rng) -> (f64, Vec<f64>) {
    random_point_trimmed(model, rng, 0.01)
}

/// Random point with `trim` of the sample window cut from each end.
fn random_point_trimmed(model: &SpacetimeModel, rng: &mut ChaCha8Rng, trim: f64) -> (f64, Vec<f64>) {
    let (a, b) = model.sample_window();
    let margin = trim * (b - a);
    let x0 = rng.random_range(a + margin..b - margin);
    let x = model.periods().iter().map(|&l| rng.random_range(0.0..l)).collect();
    (x0, x)
}

#[test]
fn christoffels_of_flat_and_exp_rw() {
    let flat = make_minkowski_slab(2, -1.0, 1.0, None).unwrap();
    let c = christoffel_time(&flat, 0.3, &[0.1, 0.2]).unwrap();
    assert_eq!(c.g000, 0.0);
    assert_eq!(c.g00i, Vect::zeros(2));
    assert_eq!(c.g0ij, Mat::zeros(2));

    let c = christoffel_time(&exp_rw(2), 0.7, &[1.0, 2.0]).unwrap();
    assert_eq!(c.g000, -1.0);
    assert_eq!(c.g00i, Vect::zeros(2));
    assert_eq!(c.g0ij, Mat::identity(2).scaled(-1.0));

    // psi independent of x
    let c = christoffel_time(&sads(), 0.4, &[0.3, 0.9]).unwrap();
    assert_eq!(c.g00i, Vect::zeros(2));
}

#[test]
fn christoffel_rejects_out_of_range_time() {
    assert!(matches!(christoffel_time(&sads(), 1.5, &[0.0, 0.0]), Err(ImcfError::Domain(_))));
}

#[test]
fn slice_mean_curvature_values() {
    let flat = make_minkowski_slab(1, -1.0, 1.0, None).unwrap();
    let s = slice_geometry(&flat, 0.0, &[0.0]).unwrap();
    assert_eq!(s.hbar_trace, 0.0);
    assert_eq!(s.hbar.max_abs(), 0.0);

    let m = exp_rw(1);
    assert!((slice_geometry(&m, 0.0, &[0.0]).unwrap().hbar_trace - 1.0).abs() < 1e-15);
    assert!((slice_geometry(&m, LN_2, &[0.0]).unwrap().hbar_trace - 2.0).abs() < 1e-14);

    // r = 0.5 with x0 = r0 - r and r0 = 1: Hbar = ft^{-1/2}(ft'/2 + ft/r) = 1/sqrt(0.75)
    let s = slice_geometry(&sads(), 0.5, &[0.0, 0.0]).unwrap();
    assert!((s.hbar_trace - 1.154_700_538_379_251_5).abs() < 1e-12, "{}", s.hbar_trace);
}

#[test]
fn christoffel_and_slice_geometry_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for model in builtins() {
        for _ in 0..200 {
            let (x0, x) = random_point(&model, &mut rng);
            let c = christoffel_time(&model, x0, &x).unwrap();
            let s = slice_geometry(&model, x0, &x).unwrap();
            let lhs = c.g0ij.scaled(-1.0);
            let rhs = s.hbar.scaled(1.0 / s.conf);
            assert!(lhs.sub(&rhs).max_abs() < 1e-12, "{}", model.name());
            // Hbar is the trace against the slice metric e^{2 psi} sigma
            let ginv = model.sigma(x0, &x).scaled(s.conf * s.conf).cholesky().unwrap().inverse();
            assert!((ginv.contract(&s.hbar) - s.hbar_trace).abs() <= 1e-12 * (1.0 + s.hbar_trace.abs()));
        }
    }
}

#[test]
fn analytic_derivatives_match_central_differences() {
    let h = 1e-4;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * a.abs().max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for model in builtins() {
        let d = model.dim();
        for _ in 0..1000 {
            // a fixed step cannot resolve the log blow-up of psi right at the horizon
            let (x0, x) = random_point_trimmed(&model, &mut rng, 0.1);
            let (p0, grad) = model.dpsi(x0, &x);
            let fd0 = (model.psi(x0 + h, &x) - model.psi(x0 - h, &x)) / (2.0 * h);
            assert!(close(p0, fd0), "{} dpsi0 {p0} vs {fd0}", model.name());
            let s0 = model.dsigma0(x0, &x);
            let fds0 = model.sigma(x0 + h, &x).sub(&model.sigma(x0 - h, &x)).scaled(0.5 / h);
            for i in 0..d {
                for j in 0..d {
                    assert!(close(s0[(i, j)], fds0[(i, j)]), "{} dsigma0", model.name());
                }
            }
            for k in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fdk = (model.psi(x0, &xp) - model.psi(x0, &xm)) / (2.0 * h);
                assert!(close(grad[k], fdk), "{} dpsi_{k}", model.name());
                let sk = model.dsigmak(x0, &x, k);
                let fdsk = model.sigma(x0, &xp).sub(&model.sigma(x0, &xm)).scaled(0.5 / h);
                for i in 0..d {
                    for j in 0..d {
                        assert!(close(sk[(i, j)], fdsk[(i, j)]), "{} dsigma_{k}", model.name());
                    }
                }
            }
        }
    }
}

#[test]
fn sigma_positive_definite_and_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for model in builtins() {
        for _ in 0..500 {
            let (x0, x) = random_point(&model, &mut rng);
            assert!(model.sigma(x0, &x).cholesky().is_ok());
            assert_eq!(model.sigma(x0, &x), model.sigma(x0, &x));
            assert_eq!(model.psi(x0, &x).to_bits(), model.psi(x0, &x).to_bits());
        }
    }
}

#[test]
fn ricci_contraction_flat_and_sads() {
    let flat = make_minkowski_slab(1, -1.0, 1.0, None).unwrap();
    let nu = unit_timelike(&flat, 0.0, &[0.0], &Vect::zeros(1)).unwrap();
    assert_eq!(ambient_ricci_contraction(&flat, 0.0, &[0.0], &nu).unwrap(), 0.0);
    assert!(ricci_contraction_fd(&flat, 0.0, &[0.0], &nu).unwrap().abs() < 1e-9);

    let m = sads();
    let nu = unit_timelike(&m, 0.4, &[0.0, 0.0], &Vect::from_slice(&[0.2, -0.3])).unwrap();
    let v = ambient_ricci_contraction(&m, 0.4, &[0.0, 0.0], &nu).unwrap();
    assert!((v - 2.0).abs() < 1e-12, "{v}");
}

#[test]
fn ricci_rejects_non_timelike() {
    let m = exp_rw(1);
    let null = Vect::from_slice(&[1.0, 1.0]);
    assert!(matches!(ambient_ricci_contraction(&m, 0.0, &[0.0], &null), Err(ImcfError::NotTimelike(_))));
}

#[test]
fn ricci_fd_fallback_matches_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for model in [exp_rw(2), exp_rw(3), sads()] {
        for _ in 0..50 {
            let (x0, x) = random_point(&model, &mut rng);
            let w: Vec<f64> = (0..model.dim()).map(|_| rng.random_range(-0.4..0.4)).collect();
            let s = model.sigma(x0, &x);
            let wv = Vect::from_slice(&w);
            let wv = wv.scaled(0.5 / s.bilinear(&wv, &wv).sqrt().max(0.5));
            let nu = unit_timelike(&model, x0, &x, &wv).unwrap();
            let exact = model.ricci_closed_form(x0, &x, &nu).unwrap();
            let fd = ricci_contraction_fd(&model, x0, &x, &nu).unwrap();
            assert!(
                (exact - fd).abs() <= 1e-6 * exact.abs().max(1.0),
                "{} at x0={x0}: {exact} vs {fd}",
                model.name()
            );
        }
    }
}

#[test]
fn ricci_fd_stencil_must_fit_in_domain() {
    let m = sads();
    let nu = unit_timelike(&m, 0.0015, &[0.0, 0.0], &Vect::zeros(2)).unwrap();
    assert!(matches!(ricci_contraction_fd(&m, 0.0015, &[0.0, 0.0], &nu), Err(ImcfError::Domain(_))));
}

#[test]
fn reference_norm_examples() {
    let flat = make_minkowski_slab(2, -1.0, 1.0, None).unwrap();
    let e0 = Vect::from_slice(&[1.0, 0.0, 0.0]);
    assert_eq!(reference_norm(&flat, 0.0, &[0.0, 0.0], &e0).unwrap(), 1.0);
    let null = Vect::from_slice(&[1.0, 1.0, 0.0]);
    assert!((reference_norm(&flat, 0.0, &[0.0, 0.0], &null).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    let m = exp_rw(1);
    let v = reference_norm(&m, 1.0, &[0.0], &Vect::from_slice(&[1.0, 0.0])).unwrap();
    assert!((v - (-1.0f64).exp()).abs() < 1e-15);
}

proptest! {
    #[test]
    fn reference_norm_positive(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, x0 in 0.01f64..0.99) {
        prop_assume!(a != 0.0 || b != 0.0 || c != 0.0);
        let m = sads();
        let v = reference_norm(&m, x0, &[0.3, 1.0], &Vect::from_slice(&[a, b, c])).unwrap();
        prop_assert!(v > 0.0);
    }
}

#[test]
fn sads_lapse_horizon_and_slice_curvature() {
    assert!((sads_f_tilde(1, -1.0, 1.0, 0, 0.5) - 0.75).abs() < 1e-15);
    let r0 = sads_horizon(1, -1.0, 1.0, 0).unwrap();
    assert!((r0 - 1.0).abs() < 1e-12);
    let m = sads();
    assert_eq!(m.dim(), 2);
    let (lo, hi) = m.x0_range();
    assert!((lo - 1e-3).abs() < 1e-15 && (hi - (r0 - 1e-3)).abs() < 1e-12);
    // sign change at r = 1/sqrt(2)
    let x_cross = r0 - std::f64::consts::FRAC_1_SQRT_2;
    let hc = slice_geometry(&m, x_cross, &[0.0, 0.0]).unwrap().hbar_trace;
    assert!(hc.abs() < 1e-9, "{hc}");
    // horizon end (x0 -> 0) vs singularity end (x0 -> r0)
    let near_horizon = slice_geometry(&m, 2e-3, &[0.0, 0.0]).unwrap().hbar_trace;
    let near_sing = slice_geometry(&m, r0 - 2e-3, &[0.0, 0.0]).unwrap().hbar_trace;
    assert!(near_horizon < -10.0, "{near_horizon}");
    assert!(near_sing > 100.0, "{near_sing}");
    // closed form of the slice curvature at several radii
    for &r in &[0.1f64, 0.3, 0.6, 0.9] {
        let ft = 1.0 - r * r;
        let expected = ft.powf(-0.5) * (-r + ft / r);
        let got = slice_geometry(&m, r0 - r, &[0.0, 0.0]).unwrap().hbar_trace;
        assert!((got - expected).abs() < 1e-10 * expected.abs().max(1.0));
    }
}

#[test]
fn sads_constructor_errors() {
    assert!(matches!(make_sads_interior(2, -1.0, 1.0, 1), Err(ImcfError::UnsupportedTopology(_))));
    assert!(matches!(make_sads_interior(1, 1.0, 1.0, 0), Err(ImcfError::NoHorizon(_))));
    assert!(matches!(make_sads_interior(1, -1.0, 1.0, 1), Err(ImcfError::NoHorizon(_))));
}

#[test]
fn reparameterize_exp_rw_constant_rate() {
    let (lambda, d) = (0.5, 2);
    let m = make_exp_rw(lambda, d, None).unwrap();
    let rate = d as f64 * lambda;
    let tau0 = 0.25;
    let w = reparameterize(&m, Arc::new(move |_| rate), tau0).unwrap();
    for k in 1..50 {
        let xt = 0.1 * k as f64;
        let x0 = tau0 + xt / rate;
        assert!((w.psi(xt, &[0.0, 0.0]) - (m.psi(x0, &[0.0, 0.0]) - rate.ln())).abs() < 1e-9);
        let sg = slice_geometry(&w, xt, &[0.0, 0.0]).unwrap();
        assert!((sg.conf * sg.hbar_trace - 1.0).abs() < 1e-12);
    }
}

#[test]
fn reparameterize_identity_rate_is_time_translation() {
    let m = exp_rw(1);
    let w = reparameterize(&m, Arc::new(|_| 1.0), -1.0).unwrap();
    for k in 1..40 {
        let xt = 0.2 * k as f64;
        assert!((w.psi(xt, &[0.5]) - m.psi(xt - 1.0, &[0.5])).abs() < 1e-9);
        assert_eq!(w.sigma(xt, &[0.5]), m.sigma(xt - 1.0, &[0.5]));
    }
}

#[test]
fn reparameterize_rejects_bad_rates() {
    let m = exp_rw(1);
    assert!(matches!(reparameterize(&m, Arc::new(|_| -1.0), 0.0), Err(ImcfError::NotPositive { .. })));
    assert!(matches!(reparameterize(&m, Arc::new(|_| 2.0), 0.0), Err(ImcfError::BarrierViolated { .. })));
}

#[test]
fn reparameterized_sads_preserves_ricci_and_slices() {
    let m = sads();
    let tau0 = 1.0 - std::f64::consts::FRAC_1_SQRT_2 + 0.01;
    let inner = m.clone();
    let phi: Phi = Arc::new(move |x0| {
        let sg = slice_geometry(&inner, x0, &[0.0, 0.0]).unwrap();
        sg.conf * sg.hbar_trace
    });
    let w = reparameterize(&m, phi, tau0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let (xt, x) = random_point(&w, &mut rng);
        let sg = slice_geometry(&w, xt, &x).unwrap();
        assert!(sg.conf * sg.hbar_trace >= 1.0 - 1e-8);
        let nu = unit_timelike(&w, xt, &x, &Vect::zeros(2)).unwrap();
        assert!((ambient_ricci_contraction(&w, xt, &x, &nu).unwrap() - 2.0).abs() < 1e-9);
    }
}

