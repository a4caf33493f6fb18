//! Three small SKI computations exposed to the browser page in `www/`.
//!
//! Each export returns a flat `Float64Array`; the layout is documented on the
//! plain Rust function it wraps. Inputs live on `[-1, 1]` with unit signal
//! variance and noise variance 0.1.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use ski_core::bounds::{self, ProbeSpec};
use ski_core::gp::{self, Mode};
use ski_core::interp::{self, GridSpec};
use ski_core::kernels::{self, Dataset, Hyperparams, ParamBox, Points};
use ski_core::linalg::{self, SymmetricMatrix};
use ski_core::ski::{self, SkiModel};
use ski_core::Result;
use wasm_bindgen::prelude::*;

const HALF: f64 = 1.0;
const NOISE: f64 = 0.1;
/// Grid sizes swept by [`gram_curve`].
pub const CURVE_M: [usize; 8] = [6, 8, 12, 16, 24, 32, 48, 64];

fn hp(lengthscale: f64) -> Result<Hyperparams> {
    Hyperparams::new(1.0, lengthscale, NOISE)
}

fn linspace(count: usize) -> Vec<f64> {
    let count = count.max(2);
    (0..count).map(|i| -HALF + 2.0 * HALF * i as f64 / (count - 1) as f64).collect()
}

/// Uniform inputs with targets drawn from `N(0, K + σ²I)`.
fn sample_data(n: usize, hp: &Hyperparams, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let x = Points::new(1, (0..n).map(|_| rng.random_range(-HALF..=HALF)).collect())?;
    let cov = SymmetricMatrix::new(kernels::gram(&x, &x, hp)?)?.add_diagonal(hp.noise_variance);
    let y = linalg::sample_mvn(&linalg::cholesky(&cov)?, seed ^ 0xD1CE);
    Dataset::new(x, y, HALF)
}

/// `[x; exact; interpolated]` for the slice `k(·, 0)` at `points` inputs.
pub fn kernel_slice(m_per_dim: usize, lengthscale: f64, points: usize) -> Result<Vec<f64>> {
    let hp = hp(lengthscale)?;
    let grid = GridSpec::new(1, m_per_dim, HALF)?;
    let f = |z: &[f64]| kernels::rbf(z, &[0.0], &hp).unwrap_or(f64::NAN);
    let xs = linspace(points);
    let exact: Vec<f64> = xs.iter().map(|&x| f(&[x])).collect();
    let approx: Vec<f64> = xs.iter().map(|&x| interp::interpolate_fn(&grid, &[x], f)).collect::<Result<_>>()?;
    Ok([xs, exact, approx].concat())
}

/// `[m; ‖K - K̃‖₂; γ]` over [`CURVE_M`], with γ from freshly calibrated constants.
pub fn gram_curve(n: usize, lengthscale: f64, seed: u64) -> Result<Vec<f64>> {
    let hp = hp(lengthscale)?;
    let data = sample_data(n, &hp, seed)?;
    let bx = ParamBox::new([0.5, 0.5 * lengthscale], [2.0, 2.0 * lengthscale])?;
    let consts = bounds::calibrate(&ProbeSpec::standard(1, HALF, hp, seed), &data, &bx)?;
    let exact = kernels::gram(data.x(), data.x(), &hp)?;
    let mut ms = Vec::new();
    let mut errs = Vec::new();
    let mut gammas = Vec::new();
    for m in CURVE_M {
        let model = SkiModel::build(&data, &GridSpec::new(1, m, HALF)?, &hp)?;
        let diff: DMatrix<f64> = ski::ski_gram(&model)? - &exact;
        ms.push(m as f64);
        errs.push(linalg::spectral_norm(&diff)?);
        gammas.push(bounds::gamma(n, m, 1, HALF, &consts)?);
    }
    Ok([ms, errs, gammas].concat())
}

/// `[x; exact mean; SKI mean; exact sd; SKI sd]` at `points` test inputs,
/// followed by the `n` training inputs and the `n` targets.
pub fn posterior(n: usize, m_per_dim: usize, lengthscale: f64, seed: u64, points: usize) -> Result<Vec<f64>> {
    let hp = hp(lengthscale)?;
    let data = sample_data(n, &hp, seed)?;
    let xs = linspace(points);
    let test = Points::new(1, xs.clone())?;
    let grid = GridSpec::new(1, m_per_dim, HALF)?;
    let exact = gp::posterior(&data, &test, &hp, Mode::Exact)?;
    let approx = gp::posterior(&data, &test, &hp, Mode::Ski(&grid))?;
    let sd = |p: &gp::Posterior| -> Vec<f64> {
        p.covariance.matrix().diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    };
    Ok([xs, exact.mean.clone(), approx.mean.clone(), sd(&exact), sd(&approx), data.x().coords().to_vec(), data.y().to_vec()]
        .concat())
}

fn js(e: ski_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = kernelSlice)]
pub fn kernel_slice_js(m_per_dim: usize, lengthscale: f64, points: usize) -> std::result::Result<Vec<f64>, JsError> {
    kernel_slice(m_per_dim, lengthscale, points).map_err(js)
}

#[wasm_bindgen(js_name = gramCurve)]
pub fn gram_curve_js(n: usize, lengthscale: f64, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    gram_curve(n, lengthscale, seed as u64).map_err(js)
}

#[wasm_bindgen(js_name = posterior)]
pub fn posterior_js(
    n: usize,
    m_per_dim: usize,
    lengthscale: f64,
    seed: u32,
    points: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    posterior(n, m_per_dim, lengthscale, seed as u64, points).map_err(js)
}

#[wasm_bindgen(js_name = curveGridSizes)]
pub fn curve_grid_sizes() -> Vec<f64> {
    CURVE_M.iter().map(|&m| m as f64).collect()
}
