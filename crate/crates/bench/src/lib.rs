//! Sweep harness that measures SKI approximation errors and compares them
//! with their theoretical bounds.
//!
//! [`run`] executes the experiments named in a [`SweepConfig`] and returns a
//! [`Summary`]; [`Summary::write`] puts one CSV per experiment and a
//! `summary.json` on disk.

pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod report;
pub mod selftest;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use ski_core::bounds::Constants;

pub use config::{Experiment, SweepConfig};
pub use error::BenchError;
pub use report::Summary;

/// Dimensions whose constants the requested experiments need.
fn calibration_dims(cfg: &SweepConfig) -> BTreeSet<usize> {
    let mut dims = BTreeSet::new();
    if cfg.experiments.iter().any(|e| e.uses_bound_cells()) {
        dims.extend(&cfg.dims);
    }
    if cfg.experiments.contains(&Experiment::Sizing) {
        dims.insert(1);
    }
    if cfg.experiments.contains(&Experiment::Regimes) {
        dims.extend(&cfg.regimes.dims);
    }
    dims
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| BenchError::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Calibrate the constants for every dimension in `dims`.
pub fn calibrate_dims(cfg: &SweepConfig, dims: &BTreeSet<usize>) -> Result<BTreeMap<usize, Constants>, BenchError> {
    let dims: Vec<usize> = dims.iter().copied().collect();
    with_pool(cfg.jobs, || {
        dims.par_iter()
            .map(|&d| Ok((d, experiments::calibrate_dim(cfg, d)?)))
            .collect::<Result<BTreeMap<_, _>, ski_core::Error>>()
    })?
    .map_err(BenchError::from)
}

/// Constants for the dimensions the configured experiments would use.
pub fn calibrate(cfg: &SweepConfig) -> Result<BTreeMap<usize, Constants>, BenchError> {
    cfg.validate()?;
    let mut dims = calibration_dims(cfg);
    if dims.is_empty() {
        dims.extend(&cfg.dims);
    }
    calibrate_dims(cfg, &dims)
}

/// Run every requested experiment. Output order follows [`Experiment::ALL`].
pub fn run(cfg: &SweepConfig) -> Result<Summary, BenchError> {
    cfg.validate()?;
    let consts = calibrate_dims(cfg, &calibration_dims(cfg))?;
    let outputs = with_pool(cfg.jobs, || -> Result<_, ski_core::Error> {
        let cells = if cfg.experiments.iter().any(|e| e.uses_bound_cells()) {
            experiments::bound_cells(cfg, &consts)?
        } else {
            Vec::new()
        };
        let mut bound_outs = experiments::bound_outputs(cfg, &cells);
        let mut outs = Vec::new();
        for exp in Experiment::ALL.into_iter().filter(|e| cfg.experiments.contains(e)) {
            let out = match exp {
                Experiment::KernelRate => experiments::kernel_rate(cfg)?,
                Experiment::GramRate => experiments::gram_rate(cfg)?,
                Experiment::NGrowth => experiments::n_growth(cfg)?,
                Experiment::Sizing => experiments::sizing(cfg, &consts[&1])?,
                Experiment::Regimes => experiments::regimes(cfg, &consts)?,
                Experiment::Ascent => experiments::ascent(cfg)?,
                Experiment::Score | Experiment::InverseAction | Experiment::Logdet | Experiment::Posterior => {
                    bound_outs.remove(&exp).expect("one output per bound experiment")
                }
            };
            outs.push(out);
        }
        Ok(outs)
    })??;
    let constants = consts.into_iter().map(|(d, c)| (format!("d{d}"), c)).collect();
    Ok(Summary::new(constants, outputs))
}
