mod common;

use common::{gp_data, lattice_points, rel_err, rng, uniform_points};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;
use ski_core::interp::GridSpec;
use ski_core::kernels::{self, Dataset, Hyperparams, Param, Points};
use ski_core::linalg::spectral_norm;
use ski_core::ski::{self, ski_cross, ski_gram, ski_gram_partial, ski_kernel, ski_mvm, SkiModel};

fn dataset(points: Points) -> Dataset {
    let n = points.len();
    Dataset::new(points, vec![0.0; n], 1.0).unwrap()
}

/// `W K_U Wᵀ` with every factor formed densely.
fn dense_oracle(model: &SkiModel) -> DMatrix<f64> {
    let w = model.weights().to_dense();
    let k_u = model.dense_k_u().unwrap();
    &w * k_u.matrix() * w.transpose()
}

#[test]
fn gram_matches_dense_triple_product() {
    let hp = common::hp();
    for (seed, d, m) in [(1u64, 1usize, 10usize), (2, 2, 6), (3, 3, 4)] {
        let data = dataset(uniform_points(&mut rng(seed), 40, d, 1.0));
        let model = SkiModel::build(&data, &GridSpec::new(d, m, 1.0).unwrap(), &hp).unwrap();
        let fast = ski_gram(&model).unwrap();
        let slow = dense_oracle(&model);
        assert!((&fast - &slow).amax() < 1e-12, "d = {d}");
    }
}

#[test]
fn lattice_views_agree() {
    let hp = Hyperparams::new(1.4, 0.7, 0.1).unwrap();
    let grid = GridSpec::new(2, 5, 1.0).unwrap();
    let model = SkiModel::build(&dataset(uniform_points(&mut rng(4), 3, 2, 1.0)), &grid, &hp).unwrap();
    let a = model.operator().to_dense();
    let b = model.dense_k_u().unwrap();
    assert!((&a - b.matrix()).amax() < 1e-12);
}

#[test]
fn exact_on_lattice_nodes() {
    let hp = common::hp();
    for (d, m) in [(1usize, 16usize), (2, 8), (3, 4)] {
        let pts = lattice_points(&mut rng(5), 30, d, m);
        let data = dataset(pts.clone());
        let model = SkiModel::build(&data, &GridSpec::new(d, m, 1.0).unwrap(), &hp).unwrap();
        let exact = kernels::gram(&pts, &pts, &hp).unwrap();
        assert!((ski_gram(&model).unwrap() - exact).amax() < 1e-12, "d = {d}");
        for p in Param::ALL {
            let exact = kernels::gram_partial(&pts, &hp, p).unwrap();
            assert!((ski_gram_partial(&model, p).unwrap() - exact).amax() < 1e-12, "d = {d} {p}");
        }
    }
}

#[test]
fn single_training_point() {
    let hp = common::hp();
    let data = dataset(Points::new(2, vec![0.31, -0.77]).unwrap());
    let model = SkiModel::build(&data, &GridSpec::new(2, 8, 1.0).unwrap(), &hp).unwrap();
    let k = ski_gram(&model).unwrap();
    assert_eq!(k.shape(), (1, 1));
    assert!((k[(0, 0)] - 1.0).abs() < 0.05);
    assert!((k[(0, 0)] - ski_kernel(&model, &[0.31, -0.77], &[0.31, -0.77]).unwrap()).abs() < 1e-15);
}

#[test]
fn spectral_error_below_frobenius_error() {
    let hp = common::hp();
    let data = gp_data(6, 120, 2, &hp);
    let model = SkiModel::build(&data, &GridSpec::new(2, 8, 1.0).unwrap(), &hp).unwrap();
    let diff = ski_gram(&model).unwrap() - kernels::gram(data.x(), data.x(), &hp).unwrap();
    let two = spectral_norm(&diff).unwrap();
    assert!(two > 0.0 && two <= diff.norm());
}

fn max_kernel_error(m: usize, pairs: &[(f64, f64)], hp: &Hyperparams) -> f64 {
    let data = dataset(Points::new(1, vec![0.0]).unwrap());
    let model = SkiModel::build(&data, &GridSpec::new(1, m, 1.0).unwrap(), hp).unwrap();
    pairs
        .iter()
        .map(|&(x, y)| (ski_kernel(&model, &[x], &[y]).unwrap() - kernels::rbf(&[x], &[y], hp).unwrap()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn kernel_error_is_cubic_in_spacing() {
    let hp = common::hp();
    let mut r = rng(7);
    let pairs: Vec<(f64, f64)> = (0..2000).map(|_| (r.random_range(-1.0..=1.0), r.random_range(-1.0..=1.0))).collect();
    let errs: Vec<f64> = [16usize, 32, 64, 128].iter().map(|&m| max_kernel_error(m, &pairs, &hp)).collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((6.5..=9.5).contains(&ratio), "halving ratio {ratio} ({errs:?})");
    }
}

#[test]
fn gram_is_symmetric() {
    let hp = common::hp();
    let data = dataset(uniform_points(&mut rng(8), 60, 2, 1.0));
    let k = ski_gram(&SkiModel::build(&data, &GridSpec::new(2, 7, 1.0).unwrap(), &hp).unwrap()).unwrap();
    assert_eq!(k, k.transpose());
}

#[test]
fn gram_is_psd() {
    let hp = common::hp();
    let data = dataset(uniform_points(&mut rng(9), 80, 2, 1.0));
    let k = ski_gram(&SkiModel::build(&data, &GridSpec::new(2, 8, 1.0).unwrap(), &hp).unwrap()).unwrap();
    let min = SymmetricEigen::new(k).eigenvalues.min();
    assert!(min >= -1e-10, "min eigenvalue {min}");
}

#[test]
fn mvm_matches_dense_product() {
    let hp = common::hp();
    let data = dataset(uniform_points(&mut rng(10), 200, 2, 1.0));
    let model = SkiModel::build(&data, &GridSpec::new(2, 12, 1.0).unwrap(), &hp).unwrap();
    let k = ski_gram(&model).unwrap();
    let mut r = rng(11);
    let v: Vec<f64> = (0..200).map(|_| r.random_range(-1.0..1.0)).collect();
    let fast = ski_mvm(&model, &v).unwrap();
    let slow = &k * DVector::from_column_slice(&v);
    let err = (DVector::from_vec(fast) - &slow).norm() / slow.norm();
    assert!(err < 1e-10, "relative error {err}");
    for i in [0usize, 57, 199] {
        let mut e = vec![0.0; 200];
        e[i] = 1.0;
        let col = ski_mvm(&model, &e).unwrap();
        for (j, c) in col.iter().enumerate() {
            assert!((c - k[(j, i)]).abs() < 1e-12);
        }
    }
}

#[test]
fn partials_match_finite_differences() {
    let hp = Hyperparams::new(1.2, 0.6, 0.1).unwrap();
    let data = dataset(uniform_points(&mut rng(12), 25, 2, 1.0));
    let grid = GridSpec::new(2, 8, 1.0).unwrap();
    let eps = 1e-5;
    for p in Param::ALL {
        let shifted = |s: f64| {
            let mut t = hp.theta();
            t[p.index()] += s;
            ski_gram(&SkiModel::build(&data, &grid, &hp.with_theta(t).unwrap()).unwrap()).unwrap()
        };
        let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
        let an = ski_gram_partial(&SkiModel::build(&data, &grid, &hp).unwrap(), p).unwrap();
        let err = (&fd - &an).norm() / an.norm();
        assert!(err < 1e-6, "{p}: relative error {err}");
    }
}

#[test]
fn cross_rows_match_kernel_calls() {
    let hp = common::hp();
    let data = dataset(uniform_points(&mut rng(13), 20, 2, 1.0));
    let model = SkiModel::build(&data, &GridSpec::new(2, 9, 1.0).unwrap(), &hp).unwrap();
    let test = uniform_points(&mut rng(14), 7, 2, 1.0);
    let c = ski_cross(&model, &test).unwrap();
    assert_eq!(c.shape(), (7, 20));
    for i in 0..7 {
        for j in 0..20 {
            let want = ski_kernel(&model, test.row(i), data.x().row(j)).unwrap();
            assert!(rel_err(c[(i, j)], want) < 1e-12 || (c[(i, j)] - want).abs() < 1e-15);
        }
    }
}

#[test]
fn out_of_domain_and_shape_errors() {
    let hp = common::hp();
    let data = dataset(uniform_points(&mut rng(15), 5, 2, 1.0));
    assert!(SkiModel::build(&data, &GridSpec::new(1, 8, 1.0).unwrap(), &hp).is_err());
    let model = SkiModel::build(&data, &GridSpec::new(2, 8, 1.0).unwrap(), &hp).unwrap();
    assert!(ski_kernel(&model, &[0.0, 1.5], &[0.0, 0.0]).is_err());
    let far = Points::new(2, vec![0.0, -1.2]).unwrap();
    assert!(ski_cross(&model, &far).is_err());
}

#[test]
fn dense_assembly_limit() {
    let hp = common::hp();
    let data = dataset(uniform_points(&mut rng(16), ski::DENSE_LIMIT + 1, 1, 1.0));
    let model = SkiModel::build(&data, &GridSpec::new(1, 8, 1.0).unwrap(), &hp).unwrap();
    assert!(ski_gram(&model).is_err());
    assert!(ski_mvm(&model, &vec![1.0; ski::DENSE_LIMIT + 1]).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mvm_agrees_with_dense_for_random_inputs(seed in any::<u64>(), n in 1usize..40, m in 4usize..12) {
        let hp = common::hp();
        let data = dataset(uniform_points(&mut rng(seed), n, 2, 1.0));
        let model = SkiModel::build(&data, &GridSpec::new(2, m, 1.0).unwrap(), &hp).unwrap();
        let k = ski_gram(&model).unwrap();
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
        let fast = DVector::from_vec(ski_mvm(&model, &v).unwrap());
        let slow = &k * DVector::from_column_slice(&v);
        prop_assert!((fast - &slow).norm() <= 1e-10 * slow.norm().max(1.0));
    }

    #[test]
    fn ski_kernel_is_symmetric(x in -1.0f64..1.0, y in -1.0f64..1.0, m in 4usize..30) {
        let hp = common::hp();
        let data = dataset(Points::new(1, vec![0.0]).unwrap());
        let model = SkiModel::build(&data, &GridSpec::new(1, m, 1.0).unwrap(), &hp).unwrap();
        let a = ski_kernel(&model, &[x], &[y]).unwrap();
        let b = ski_kernel(&model, &[y], &[x]).unwrap();
        prop_assert!((a - b).abs() <= 1e-15);
    }
}
