#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use ski_core::kernels::{self, Dataset, Hyperparams, Points};
use ski_core::linalg::{self, SymmetricMatrix};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn uniform_points(rng: &mut ChaCha20Rng, n: usize, d: usize, half: f64) -> Points {
    Points::new(d, (0..n * d).map(|_| rng.random_range(-half..=half)).collect()).unwrap()
}

/// Inputs uniform on the box, targets drawn from the GP prior plus noise.
pub fn gp_data(seed: u64, n: usize, d: usize, hp: &Hyperparams) -> Dataset {
    let mut r = rng(seed);
    let x = uniform_points(&mut r, n, d, 1.0);
    let k = SymmetricMatrix::new(kernels::gram(&x, &x, hp).unwrap()).unwrap();
    let f = linalg::sample_mvn(&linalg::cholesky(&k).unwrap(), seed.wrapping_mul(31) + 1);
    let y = f.iter().map(|v| v + hp.noise_variance.sqrt() * r.sample::<f64, _>(rand_distr::StandardNormal)).collect();
    Dataset::new(x, y, 1.0).unwrap()
}

/// Points placed on lattice nodes of a `m_per_dim` grid over `[-1, 1]^d`.
pub fn lattice_points(rng: &mut ChaCha20Rng, n: usize, d: usize, m_per_dim: usize) -> Points {
    let h = 2.0 / m_per_dim as f64;
    Points::new(d, (0..n * d).map(|_| -1.0 + rng.random_range(0..=m_per_dim) as f64 * h).collect()).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn hp() -> Hyperparams {
    Hyperparams::new(1.0, 0.5, 0.1).unwrap()
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
