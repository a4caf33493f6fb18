//! Zero-mean GP regression: marginal log-likelihood, score and posterior,
//! either with the exact kernel or with the SKI approximation substituted in
//! every kernel block.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::interp::GridSpec;
use crate::kernels::{self, Dataset, Hyperparams, Param, Points};
use crate::linalg::{self, Cholesky, SymmetricMatrix};
use crate::ski::{self, SkiModel};
use crate::{Error, Result};

/// Which kernel matrices to use.
#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    Exact,
    Ski(&'a GridSpec),
}

/// Gradient of the log-likelihood in `(σ_f², ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub values: [f64; 2],
}

impl Score {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Score) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// Predictive mean and noisy predictive covariance at the test inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub mean: Vec<f64>,
    pub covariance: SymmetricMatrix,
}

/// Kernel matrices of one model, exact or SKI.
enum Kernel {
    Exact,
    Ski(SkiModel),
}

impl Kernel {
    fn new(data: &Dataset, hp: &Hyperparams, mode: Mode<'_>) -> Result<Self> {
        Ok(match mode {
            Mode::Exact => Kernel::Exact,
            Mode::Ski(grid) => Kernel::Ski(SkiModel::build(data, grid, hp)?),
        })
    }

    fn train(&self, data: &Dataset, hp: &Hyperparams) -> Result<DMatrix<f64>> {
        match self {
            Kernel::Exact => kernels::gram(data.x(), data.x(), hp),
            Kernel::Ski(m) => ski::ski_gram(m),
        }
    }

    fn partial(&self, data: &Dataset, hp: &Hyperparams, which: Param) -> Result<DMatrix<f64>> {
        match self {
            Kernel::Exact => kernels::gram_partial(data.x(), hp, which),
            Kernel::Ski(m) => ski::ski_gram_partial(m, which),
        }
    }

    fn cross(&self, data: &Dataset, test: &Points, hp: &Hyperparams) -> Result<DMatrix<f64>> {
        match self {
            Kernel::Exact => kernels::gram(test, data.x(), hp),
            Kernel::Ski(m) => ski::ski_cross(m, test),
        }
    }

    fn test(&self, test: &Points, hp: &Hyperparams) -> Result<DMatrix<f64>> {
        match self {
            Kernel::Exact => kernels::gram(test, test, hp),
            Kernel::Ski(m) => ski::ski_gram_test(m, test),
        }
    }
}

/// Training Gram matrix `K` or `K̃` (without noise).
pub fn train_matrix(data: &Dataset, hp: &Hyperparams, mode: Mode<'_>) -> Result<DMatrix<f64>> {
    Kernel::new(data, hp, mode)?.train(data, hp)
}

/// `∂K/∂θ` or `∂K̃/∂θ`.
pub fn partial_matrix(data: &Dataset, hp: &Hyperparams, which: Param, mode: Mode<'_>) -> Result<DMatrix<f64>> {
    Kernel::new(data, hp, mode)?.partial(data, hp, which)
}

/// Cross matrix `K_{·,X}` (test rows, training columns).
pub fn cross_matrix(data: &Dataset, test: &Points, hp: &Hyperparams, mode: Mode<'_>) -> Result<DMatrix<f64>> {
    Kernel::new(data, hp, mode)?.cross(data, test, hp)
}

/// Factorised `K + σ²I` together with `α = (K + σ²I)⁻¹ y`.
pub struct Regularized {
    pub gram: DMatrix<f64>,
    pub factor: Cholesky,
    pub alpha: Vec<f64>,
}

fn regularize(gram: DMatrix<f64>, data: &Dataset, hp: &Hyperparams) -> Result<Regularized> {
    let sym = SymmetricMatrix::new(gram)?;
    let factor = linalg::cholesky(&sym.add_diagonal(hp.noise_variance))?;
    let alpha = factor.solve(data.y())?;
    Ok(Regularized { gram: sym.into_inner(), factor, alpha })
}

pub fn regularized(data: &Dataset, hp: &Hyperparams, mode: Mode<'_>) -> Result<Regularized> {
    regularize(train_matrix(data, hp, mode)?, data, hp)
}

fn loglik_from(reg: &Regularized, data: &Dataset) -> f64 {
    let fit: f64 = data.y().iter().zip(&reg.alpha).map(|(a, b)| a * b).sum();
    -0.5 * fit - 0.5 * reg.factor.log_det() - 0.5 * data.n() as f64 * (2.0 * PI).ln()
}

/// `-½ yᵀ(K+σ²I)⁻¹y - ½ log|K+σ²I| - (n/2) log 2π`
pub fn log_likelihood(data: &Dataset, hp: &Hyperparams, mode: Mode<'_>) -> Result<f64> {
    Ok(loglik_from(&regularized(data, hp, mode)?, data))
}

/// Log-likelihood and score from a single factorisation.
pub fn log_likelihood_and_score(data: &Dataset, hp: &Hyperparams, mode: Mode<'_>) -> Result<(f64, Score)> {
    let kernel = Kernel::new(data, hp, mode)?;
    let reg = regularize(kernel.train(data, hp)?, data, hp)?;
    let inv = reg.factor.inverse();
    let alpha = DVector::from_column_slice(&reg.alpha);
    let mut values = [0.0; 2];
    for p in Param::ALL {
        let dk = kernel.partial(data, hp, p)?;
        let fit = alpha.dot(&(&dk * &alpha));
        let trace = inv.component_mul(&dk).sum();
        values[p.index()] = 0.5 * fit - 0.5 * trace;
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("score is not finite".into()));
    }
    Ok((loglik_from(&reg, data), Score { values }))
}

/// `½ αᵀ (∂K/∂θ_l) α - ½ tr((K+σ²I)⁻¹ ∂K/∂θ_l)` for each hyperparameter.
pub fn score(data: &Dataset, hp: &Hyperparams, mode: Mode<'_>) -> Result<Score> {
    Ok(log_likelihood_and_score(data, hp, mode)?.1)
}

/// Predictive mean and covariance (noise included) at `test`.
pub fn posterior(data: &Dataset, test: &Points, hp: &Hyperparams, mode: Mode<'_>) -> Result<Posterior> {
    let kernel = Kernel::new(data, hp, mode)?;
    let reg = regularize(kernel.train(data, hp)?, data, hp)?;
    let cross = kernel.cross(data, test, hp)?;
    let mean = (&cross * DVector::from_column_slice(&reg.alpha)).as_slice().to_vec();
    let solved = reg.factor.solve_matrix(&cross.transpose())?;
    let mut cov = kernel.test(test, hp)? - &cross * solved;
    for i in 0..cov.nrows() {
        cov[(i, i)] += hp.noise_variance;
    }
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(Posterior { mean, covariance: SymmetricMatrix::new(cov)? })
}

/// `(‖μ̃ - μ‖₂, ‖Σ̃ - Σ‖₂)`
pub fn posterior_deviation(exact: &Posterior, approx: &Posterior) -> Result<(f64, f64)> {
    if exact.mean.len() != approx.mean.len() {
        return Err(Error::Shape(format!(
            "posteriors over {} and {} test points",
            exact.mean.len(),
            approx.mean.len()
        )));
    }
    let mean = exact.mean.iter().zip(&approx.mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let diff = approx.covariance.matrix() - exact.covariance.matrix();
    Ok((mean, linalg::spectral_norm(&diff)?))
}
