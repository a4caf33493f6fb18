//! Synthetic GP data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use ski_core::kernels::{self, Dataset, Hyperparams, Points};
use ski_core::linalg::{self, SymmetricMatrix};
use ski_core::{Error, Result};

const MAX_RETRIES: usize = 3;

/// Where the inputs come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inputs {
    /// Uniform on `[-D, D]^d`.
    Uniform,
    /// Uniform over the nodes of a lattice with `m_per_dim` cells per axis.
    Lattice { m_per_dim: usize },
}

fn draw_inputs(rng: &mut ChaCha20Rng, count: usize, d: usize, half: f64, inputs: Inputs) -> Vec<f64> {
    match inputs {
        Inputs::Uniform => (0..count * d).map(|_| rng.random_range(-half..=half)).collect(),
        Inputs::Lattice { m_per_dim } => {
            let h = 2.0 * half / m_per_dim as f64;
            (0..count * d)
                .map(|_| {
                    let k = rng.random_range(0..=m_per_dim);
                    if k == m_per_dim { half } else { -half + k as f64 * h }
                })
                .collect()
        }
    }
}

/// Training and test sets with latent values drawn jointly from the GP prior.
///
/// Training targets carry `N(0, σ²)` noise; test targets are the noiseless
/// latent values.
pub fn generate(
    d: usize,
    n: usize,
    t: usize,
    domain_halfwidth: f64,
    hp: &Hyperparams,
    seed: u64,
    inputs: Inputs,
) -> Result<(Dataset, Dataset)> {
    if d == 0 || n == 0 || t == 0 {
        return Err(Error::InvalidArgument(format!("sizes must be positive (d = {d}, n = {n}, T = {t})")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..=MAX_RETRIES {
        let coords = draw_inputs(&mut rng, n + t, d, domain_halfwidth, inputs);
        let all = Points::new(d, coords.clone())?;
        let k = SymmetricMatrix::new(kernels::gram(&all, &all, hp)?)?;
        let factor = match linalg::cholesky(&k) {
            Ok(f) => f,
            Err(e) => {
                last = Some(e);
                continue;
            }
        };
        let f = linalg::sample_mvn_from(&factor, &mut rng);
        let noise_sd = hp.noise_variance.sqrt();
        let y: Vec<f64> = f[..n].iter().map(|v| v + noise_sd * rng.sample::<f64, _>(StandardNormal)).collect();
        let train = Dataset::new(Points::new(d, coords[..n * d].to_vec())?, y, domain_halfwidth)?;
        let test = Dataset::new(Points::new(d, coords[n * d..].to_vec())?, f[n..].to_vec(), domain_halfwidth)?;
        return Ok((train, test));
    }
    Err(last.unwrap_or_else(|| Error::InvalidArgument("data generation failed".into())))
}
