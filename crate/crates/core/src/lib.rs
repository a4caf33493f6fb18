//! Structured kernel interpolation (SKI) for Gaussian-process regression,
//! together with the closed-form error bounds that govern it and the
//! measurement routines needed to check those bounds numerically.
//!
//! The crate is organised bottom-up:
//!
//! * [`interp`] – Keys cubic convolution and tensor-product weights.
//! * [`kernels`] – the RBF kernel, its hyperparameter partials and Gram assembly.
//! * [`linalg`] – Cholesky, power iteration, MVN sampling, FFT Toeplitz MVMs.
//! * [`ski`] – the SKI model `W K_U Wᵀ` and its derivative counterparts.
//! * [`gp`] – log-likelihood, score and posterior in exact and SKI modes.
//! * [`bounds`] – theoretical error bounds and constant calibration.
//! * [`trainer`] – projected gradient ascent on the SKI log-likelihood.

pub mod bounds;
pub mod error;
pub mod gp;
pub mod interp;
pub mod kernels;
pub mod linalg;
pub mod ski;
pub mod trainer;

pub use error::{Error, Result};
