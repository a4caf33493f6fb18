mod common;

use common::gp_data;
use proptest::prelude::*;
use ski_core::bounds::{self, CalibrationMeta, Constants, ProbeSpec};
use ski_core::gp::Mode;
use ski_core::interp::GridSpec;
use ski_core::kernels::{self, ParamBox};
use ski_core::linalg::spectral_norm;
use ski_core::{gp, Error};

fn consts(k_prime: f64) -> Constants {
    Constants {
        c: 1.25,
        k_prime,
        k_prime_partial: [k_prime, 2.0 * k_prime],
        c_grad: 1.0,
        m: 1.0,
        l: 4,
        mu: 1.0,
        calibration_meta: CalibrationMeta {
            d: 1,
            probe_m_per_dim: vec![],
            k_prime_ratios: vec![],
            k_prime_stable: vec![],
            k_prime_safety: 1.0,
            mu_grid: 0,
            mu_max_hessian_norm: 1.0,
            mu_safety: 1.0,
        },
    }
}

#[test]
fn gamma_closed_form() {
    let k = consts(0.2);
    for d in 1..=3usize {
        let m = 8usize.pow(d as u32);
        let h = 2.0 / 8.0;
        let delta = 0.2 * 1.25f64.powi(2 * d as i32) * h * h * h;
        let want = 100.0 * (1.0 + 2.0 * 1.25f64.powi(d as i32)) * delta;
        let got = bounds::gamma(100, m, d, 1.0, &k).unwrap();
        assert!((got - want).abs() <= 1e-13 * want);
        assert!((bounds::delta_interp(m, d, 1.0, &k).unwrap() - delta).abs() <= 1e-15);
    }
}

#[test]
fn too_few_cells_rejected() {
    assert!(bounds::gamma(10, 3, 1, 1.0, &consts(1.0)).is_err());
    assert!(bounds::gamma(10, 15, 2, 1.0, &consts(1.0)).is_err());
    assert!(bounds::gamma(10, 16, 2, 1.0, &consts(1.0)).is_ok());
}

#[test]
fn gamma_grows_with_dimension_at_fixed_spacing() {
    let k = consts(1.0);
    let c: f64 = 1.25;
    for d in 1..3usize {
        let g1 = bounds::gamma(200, 8usize.pow(d as u32), d, 1.0, &k).unwrap();
        let g2 = bounds::gamma(200, 8usize.pow(d as u32 + 1), d + 1, 1.0, &k).unwrap();
        assert!(g2 / g1 >= c.powi(d as i32), "d = {d}: ratio {}", g2 / g1);
    }
}

#[test]
fn inducing_count_is_a_perfect_power() {
    let k = consts(0.3);
    for d in 1..=3usize {
        for eps in [1e-1, 1e-2, 1e-3] {
            let m = bounds::inducing_count(500, eps, d, 1.0, &k).unwrap();
            let root = (m as f64).powf(1.0 / d as f64).round() as usize;
            assert_eq!(root.pow(d as u32), m);
            assert!(m >= 4usize.pow(d as u32));
            assert!(bounds::gamma(500, m, d, 1.0, &k).unwrap() <= eps * (1.0 + 1e-9));
        }
    }
}

#[test]
fn inducing_count_depends_on_n_over_eps() {
    let k = consts(0.3);
    for d in 1..=3usize {
        for (n, eps) in [(100usize, 1e-2), (300, 3e-3), (1000, 1e-4)] {
            let a = bounds::inducing_count(n, eps, d, 1.0, &k).unwrap();
            let b = bounds::inducing_count(2 * n, 2.0 * eps, d, 1.0, &k).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn halving_eps_scales_count_by_cube_root_of_two_to_the_d() {
    let k = consts(0.3);
    let a = bounds::inducing_count(1000, 1e-6, 1, 1.0, &k).unwrap() as f64;
    let b = bounds::inducing_count(1000, 5e-7, 1, 1.0, &k).unwrap() as f64;
    assert!((b / a - 2f64.powf(1.0 / 3.0)).abs() < 1e-3);
}

#[test]
fn bad_epsilon_rejected() {
    assert!(matches!(bounds::inducing_count(10, 0.0, 1, 1.0, &consts(1.0)), Err(Error::InvalidArgument(_))));
    assert!(bounds::inducing_count(10, -1.0, 1, 1.0, &consts(1.0)).is_err());
}

#[test]
fn linear_time_threshold_directions() {
    let k = consts(0.3);
    let ns = [1_000usize, 10_000, 100_000, 1_000_000];
    let series = |d: usize| -> Vec<f64> { ns.iter().map(|&n| bounds::linear_time_epsilon(n, d, 1.0, &k, 1.0).unwrap()).collect() };
    for d in [1usize, 2] {
        let s = series(d);
        assert!(s.windows(2).all(|w| w[1] < w[0]), "d = {d}: {s:?}");
    }
    let s3 = series(3);
    let per_log: Vec<f64> = s3.iter().zip(ns).map(|(e, n)| e / (n as f64).ln()).collect();
    for v in &per_log {
        assert!((v - per_log[0]).abs() <= 1e-9 * per_log[0]);
    }
    let s4 = series(4);
    assert!(s4.windows(2).all(|w| w[1] > w[0]), "{s4:?}");
}

#[test]
fn threshold_invariant_to_regime_constant_direction() {
    let k = consts(0.3);
    for c in [0.1, 1.0, 10.0] {
        let a = bounds::linear_time_epsilon(1000, 2, 1.0, &k, c).unwrap();
        let b = bounds::linear_time_epsilon(100_000, 2, 1.0, &k, c).unwrap();
        assert!(b < a);
    }
}

#[test]
fn covariance_decay_exponent() {
    assert_eq!(bounds::posterior_cov_decay_exponent(1), 2.0);
    assert_eq!(bounds::posterior_cov_decay_exponent(3), 0.0);
    assert!(bounds::posterior_cov_decay_exponent(4) < 0.0);
}

#[test]
fn certificate_formula_and_guards() {
    let v = bounds::ascent_certificate(2.0, 10.0, 4.0, 6, 0.5).unwrap();
    assert!((v - (2.0 * 2.0 * 6.0 / 6.0 + 0.25 / 4.0)).abs() < 1e-15);
    assert!(bounds::ascent_certificate(0.0, 1.0, 0.0, 5, 0.1).is_err());
    assert!(bounds::ascent_certificate(1.0, 1.0, 0.0, 0, 0.1).is_err());
}

#[test]
fn report_margin() {
    let r = bounds::BoundReport::new("gamma", 2.0, 1.0, "spectral");
    assert!(r.satisfied);
    assert_eq!(r.margin_ratio, 0.5);
    assert!(!bounds::BoundReport::new("gamma", 1.0, 2.0, "spectral").satisfied);
}

#[test]
fn one_dimensional_calibration_is_stable_and_sized_grids_meet_target() {
    let hp = common::hp();
    let probe = ProbeSpec::standard(1, 1.0, hp, 7);
    let data = gp_data(8, 48, 1, &hp);
    let bx = ParamBox::new([0.5, 0.3], [2.0, 1.0]).unwrap();
    let k = bounds::calibrate(&probe, &data, &bx).unwrap();
    assert!(k.calibration_meta.k_prime_stable.iter().all(|(_, s)| *s), "{:?}", k.calibration_meta);
    assert!(k.mu > 0.0 && k.k_prime > 0.0);
    assert_eq!(k.c, 1.25);

    let data = gp_data(9, 128, 1, &hp);
    let exact = kernels::gram(data.x(), data.x(), &hp).unwrap();
    for eps in [1e-1, 1e-2, 1e-3] {
        let m = bounds::inducing_count(128, eps, 1, 1.0, &k).unwrap();
        let grid = GridSpec::new(1, m, 1.0).unwrap();
        let approx = gp::train_matrix(&data, &hp, Mode::Ski(&grid)).unwrap();
        let err = spectral_norm(&(approx - &exact)).unwrap();
        assert!(err <= eps, "eps {eps}: m = {m}, error {err}");
    }
}

#[test]
fn probe_ratios_are_reproducible() {
    let probe = ProbeSpec { anchors: 3, samples: 200, ..ProbeSpec::standard(2, 1.0, common::hp(), 3) };
    let a = bounds::probe_interpolation_ratios(&probe, kernels::KernelKind::Value, 1.25).unwrap();
    let b = bounds::probe_interpolation_ratios(&probe, kernels::KernelKind::Value, 1.25).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 2);
}

#[test]
fn hessian_is_symmetric_and_negative_near_truth() {
    let hp = common::hp();
    let data = gp_data(10, 200, 1, &hp);
    let h = bounds::hessian(&data, &hp).unwrap();
    assert_eq!(h[0][1], h[1][0]);
    let ev = bounds::sym2_eigenvalues(h);
    assert!(ev[0] <= ev[1]);
    assert!(h[0][0] < 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounds_monotone_in_n_t_y_and_m(
        n in 4usize..2000,
        t in 1usize..200,
        k in 4usize..40,
        d in 1usize..=2,
        y in 0.1f64..50.0,
        s2 in 0.01f64..1.0,
    ) {
        let c = consts(0.4);
        let m = k.pow(d as u32);
        let m2 = (k + 1).pow(d as u32);
        let g = |n, m| bounds::gamma(n, m, d, 1.0, &c).unwrap();
        prop_assert!(g(n + 1, m) >= g(n, m));
        prop_assert!(g(n, m2) <= g(n, m));

        let sc = |n, m, y| bounds::score_error_bound(n, m, d, 1.0, &c, y, s2).unwrap();
        prop_assert!(sc(n + 1, m, y) >= sc(n, m, y));
        prop_assert!(sc(n, m, y + 1.0) >= sc(n, m, y));
        prop_assert!(sc(n, m2, y) <= sc(n, m, y));

        let mean = |n, t, m, y| bounds::posterior_mean_bound(n, t, m, d, 1.0, &c, y, s2).unwrap();
        prop_assert!(mean(n + 1, t, m, y) >= mean(n, t, m, y));
        prop_assert!(mean(n, t + 1, m, y) >= mean(n, t, m, y));
        prop_assert!(mean(n, t, m, y + 1.0) >= mean(n, t, m, y));
        prop_assert!(mean(n, t, m2, y) <= mean(n, t, m, y));

        let cov = |n, t, m| bounds::posterior_cov_bound(n, t, m, d, 1.0, &c, s2).unwrap();
        prop_assert!(cov(n + 1, t, m) >= cov(n, t, m));
        prop_assert!(cov(n, t + 1, m) >= cov(n, t, m));
        prop_assert!(cov(n, t, m2) <= cov(n, t, m) * (1.0 + 1e-12));

        let cr = |n, t, m| bounds::cross_kernel_bound(n, t, m, d, 1.0, &c).unwrap();
        prop_assert!(cr(n, t + 1, m) >= cr(n, t, m));
        prop_assert!(cr(n, t, m2) <= cr(n, t, m));

        let gv = g(n, m);
        prop_assert!(bounds::loglik_bound(gv, y + 1.0, s2) >= bounds::loglik_bound(gv, y, s2));
        prop_assert!(bounds::inverse_action_bound(gv, s2) >= 0.0);
        prop_assert!(bounds::logdet_bound(g(n + 1, m), s2) >= bounds::logdet_bound(gv, s2));
    }

    #[test]
    fn inducing_count_monotone(n in 10usize..5000, e in 1e-4f64..1.0, d in 1usize..=3) {
        let c = consts(0.4);
        let a = bounds::inducing_count(n, e, d, 1.0, &c).unwrap();
        prop_assert!(bounds::inducing_count(n + 10, e, d, 1.0, &c).unwrap() >= a);
        prop_assert!(bounds::inducing_count(n, e / 2.0, d, 1.0, &c).unwrap() >= a);
    }
}
