mod common;

use std::time::{Duration, Instant};

use common::rng;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use ski_core::interp::GridSpec;
use ski_core::kernels::{self, KernelKind};
use ski_core::linalg::{
    cholesky, grid_mvm, sample_mvn, spectral_norm, GridKernelOperator, SymmetricMatrix,
};
use ski_core::ski::lattice_operator;

fn random_matrix(seed: u64, r: usize, c: usize) -> DMatrix<f64> {
    let mut g = rng(seed);
    DMatrix::from_fn(r, c, |_, _| g.sample(StandardNormal))
}

fn random_spd(seed: u64, n: usize) -> SymmetricMatrix {
    let a = random_matrix(seed, n, n);
    let mut s = &a * a.transpose();
    for i in 0..n {
        s[(i, i)] += n as f64;
    }
    SymmetricMatrix::new(s).unwrap()
}

fn rel_vec_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}

#[test]
fn spectral_norm_matches_svd_oracle() {
    for seed in 0..10 {
        let a = random_matrix(seed, 20, 20);
        let svd = a.clone().svd(false, false).singular_values.max();
        let est = spectral_norm(&a).unwrap();
        assert!((est - svd).abs() / svd < 1e-8, "seed {seed}: {est} vs {svd}");
    }
    let rect = random_matrix(99, 7, 19);
    let svd = rect.clone().svd(false, false).singular_values.max();
    assert!((spectral_norm(&rect).unwrap() - svd).abs() / svd < 1e-8);
}

#[test]
fn spectral_norm_of_symmetric_indefinite() {
    let a = DMatrix::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, -5.0, 0.0, 0.0, 0.0, 1.0]);
    assert!((spectral_norm(&a).unwrap() - 5.0).abs() < 1e-9);
    let b = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]);
    assert!((spectral_norm(&b).unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn log_det_matches_eigen_oracle() {
    let hp = common::hp();
    for (seed, n) in [(1u64, 16usize), (2, 64), (3, 128)] {
        let x = common::uniform_points(&mut rng(seed), n, 2, 1.0);
        let k = SymmetricMatrix::new(kernels::gram(&x, &x, &hp).unwrap()).unwrap().add_diagonal(0.1);
        let chol = cholesky(&k).unwrap();
        let oracle: f64 = SymmetricEigen::new(k.matrix().clone()).eigenvalues.iter().map(|v| v.ln()).sum();
        assert!((chol.log_det() - oracle).abs() / oracle.abs() < 1e-8);
    }
}

#[test]
fn solve_residual() {
    for seed in 0..5 {
        let a = random_spd(seed, 16);
        let b: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = cholesky(&a).unwrap().solve(&b).unwrap();
        let ax = a.matrix() * nalgebra::DVector::from_vec(x);
        assert!(rel_vec_err(ax.as_slice(), &b) < 1e-10);
    }
}

#[test]
fn factor_reconstructs_matrix() {
    let a = random_spd(7, 12);
    let l = cholesky(&a).unwrap().lower();
    assert!((&l * l.transpose() - a.matrix()).amax() < 1e-10);
    assert!(l.upper_triangle().iter().zip(l.lower_triangle().iter()).count() > 0);
    for i in 0..12 {
        for j in i + 1..12 {
            assert_eq!(l[(i, j)], 0.0);
        }
    }
}

#[test]
fn jitter_ladder_rescues_semidefinite_matrix() {
    let v = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
    let a = SymmetricMatrix::new(&v * v.transpose()).unwrap();
    let chol = cholesky(&a).unwrap();
    assert!(chol.jitter() > 0.0);
    let z = SymmetricMatrix::new(DMatrix::zeros(4, 4)).unwrap().add_diagonal(1e-300);
    assert!(cholesky(&z).is_ok());
}

#[test]
fn sampling_is_deterministic() {
    let f = cholesky(&random_spd(3, 10)).unwrap();
    assert_eq!(sample_mvn(&f, 42), sample_mvn(&f, 42));
    assert_ne!(sample_mvn(&f, 42), sample_mvn(&f, 43));
}

#[test]
fn sampling_with_zero_covariance() {
    let z = SymmetricMatrix::new(DMatrix::zeros(50, 50)).unwrap();
    let f = cholesky(&z.add_diagonal(1e-12)).unwrap();
    let s = sample_mvn(&f, 5);
    let norm: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm < 1e-4 * (50f64).sqrt());
}

#[test]
fn sample_variance_of_standard_normal() {
    let f = cholesky(&SymmetricMatrix::new(DMatrix::identity(1, 1)).unwrap()).unwrap();
    let draws: Vec<f64> = (0..100_000u64).map(|s| sample_mvn(&f, s)[0]).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (draws.len() - 1) as f64;
    assert!((var - 1.0).abs() < 0.05, "variance {var}");
}

fn random_vec(seed: u64, n: usize) -> Vec<f64> {
    let mut g = rng(seed);
    (0..n).map(|_| g.sample(StandardNormal)).collect()
}

#[test]
fn grid_mvm_matches_dense_operator() {
    let hp = common::hp();
    for (d, m) in [(1usize, 8usize), (1, 37), (2, 8), (2, 11), (3, 4)] {
        let grid = GridSpec::new(d, m, 1.0).unwrap();
        for kind in KernelKind::ALL {
            let op = lattice_operator(&grid, &hp, kind).unwrap();
            let dense = op.to_dense();
            let v = random_vec(m as u64, op.order());
            let fast = grid_mvm(&op, &v).unwrap();
            let slow = &dense * nalgebra::DVector::from_vec(v);
            assert!(rel_vec_err(&fast, slow.as_slice()) < 1e-10, "d={d} m={m} {kind:?}");
        }
    }
}

#[test]
fn dense_operator_matches_kernel_on_nodes() {
    let hp = common::hp();
    let grid = GridSpec::new(2, 6, 1.0).unwrap();
    for kind in KernelKind::ALL {
        let op = lattice_operator(&grid, &hp, kind).unwrap();
        let dense = op.to_dense();
        for i in (0..grid.m_total()).step_by(7) {
            for j in (0..grid.m_total()).step_by(5) {
                let want = kernels::eval(&grid.node(i), &grid.node(j), &hp, kind).unwrap();
                assert!((dense[(i, j)] - want).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn grid_mvm_first_column() {
    let op = lattice_operator(&GridSpec::new(2, 5, 1.0).unwrap(), &common::hp(), KernelKind::Value).unwrap();
    let mut e = vec![0.0; op.order()];
    e[0] = 1.0;
    let col = grid_mvm(&op, &e).unwrap();
    let dense = op.to_dense();
    for (i, v) in col.iter().enumerate() {
        assert!((v - dense[(i, 0)]).abs() < 1e-14);
    }
}

#[test]
fn grid_mvm_rejects_wrong_length() {
    let op = GridKernelOperator::new(vec![(1.0, vec![vec![1.0, 0.5, 0.1, 0.0]])]).unwrap();
    assert!(grid_mvm(&op, &[1.0; 5]).is_err());
}

fn best_of(reps: usize, f: impl Fn()) -> Duration {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .unwrap()
}

#[test]
fn grid_mvm_scales_like_m_log_m() {
    let hp = common::hp();
    let sizes = [1 << 14, 1 << 15, 1 << 16, 1 << 17];
    let times: Vec<Duration> = sizes
        .iter()
        .map(|&m| {
            let op = lattice_operator(&GridSpec::new(1, m, 1.0).unwrap(), &hp, KernelKind::Value).unwrap();
            let v = random_vec(1, op.order());
            best_of(7, || {
                std::hint::black_box(grid_mvm(&op, &v).unwrap());
            })
        })
        .collect();
    for w in times.windows(2) {
        let ratio = w[1].as_secs_f64() / w[0].as_secs_f64();
        assert!(ratio < 3.0, "doubling ratio {ratio} ({times:?})");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spectral_norm_transpose_invariant(seed in any::<u64>(), r in 2usize..12, c in 2usize..12) {
        let a = random_matrix(seed, r, c);
        let n1 = spectral_norm(&a).unwrap();
        let n2 = spectral_norm(&a.transpose()).unwrap();
        prop_assert!((n1 - n2).abs() <= 1e-10 * n1.max(n2) * 10.0, "{} vs {}", n1, n2);
    }

    #[test]
    fn grid_mvm_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0, m in 4usize..10) {
        let op = lattice_operator(&GridSpec::new(2, m, 1.0).unwrap(), &common::hp(), KernelKind::Value).unwrap();
        let u = random_vec(seed, op.order());
        let v = random_vec(seed ^ 1, op.order());
        let combo: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + b).collect();
        let lhs = grid_mvm(&op, &combo).unwrap();
        let (fu, fv) = (grid_mvm(&op, &u).unwrap(), grid_mvm(&op, &v).unwrap());
        let rhs: Vec<f64> = fu.iter().zip(&fv).map(|(a, b)| alpha * a + b).collect();
        let scale = rhs.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        let diff = lhs.iter().zip(&rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-10 * scale);
    }
}
