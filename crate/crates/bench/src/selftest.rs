//! Quick checks of the harness plumbing, run by `ski-bounds selftest`.

use ski_core::gp::{self, Mode};
use ski_core::kernels::{Dataset, Hyperparams, Points};

use crate::config::SweepConfig;
use crate::data::{generate, Inputs};
use crate::error::BenchError;
use crate::fit::fit_rate;
use crate::report::Check;

fn fit_slopes() -> Result<Vec<Check>, BenchError> {
    let cubic: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, (i as f64).powi(3))).collect();
    let flat: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, 2.5)).collect();
    let a = fit_rate(&cubic)?;
    let b = fit_rate(&flat)?;
    Ok(vec![
        Check::new("fit_recovers_cubic", (a.slope - 3.0).abs() <= 1e-10, format!("slope {}", a.slope)),
        Check::new("fit_constant_has_zero_slope", b.slope.abs() <= 1e-12, format!("slope {}", b.slope)),
    ])
}

fn deterministic_generation(hp: &Hyperparams) -> Result<Check, BenchError> {
    let a = generate(2, 40, 8, 1.0, hp, 17, Inputs::Uniform)?;
    let b = generate(2, 40, 8, 1.0, hp, 17, Inputs::Uniform)?;
    let same = a.0.x().coords() == b.0.x().coords() && a.0.y() == b.0.y() && a.1.y() == b.1.y();
    Ok(Check::new("generation_is_deterministic", same, "seed 17, d = 2, n = 40, T = 8"))
}

fn noiseless_interpolation() -> Result<Check, BenchError> {
    // Zero noise is not a valid hyperparameter; 1e-10 is close enough.
    let hp = Hyperparams::new(1.0, 0.5, 1e-10)?;
    let x = Points::new(1, (0..8).map(|i| -0.9 + 0.25 * i as f64).collect())?;
    let y: Vec<f64> = x.rows().map(|p| (3.0 * p[0]).sin()).collect();
    let data = Dataset::new(x.clone(), y.clone(), 1.0)?;
    let post = gp::posterior(&data, &x, &hp, Mode::Exact)?;
    let worst = post.mean.iter().zip(&y).map(|(m, t)| (m - t).abs()).fold(0.0, f64::max);
    Ok(Check::new("noiseless_posterior_reproduces_targets", worst < 1e-6, format!("max deviation {worst:e}")))
}

fn prior_variance(hp: &Hyperparams) -> Result<Check, BenchError> {
    let draws: Vec<f64> = (0..200u64)
        .map(|seed| Ok(generate(1, 1, 1, 1.0, hp, seed, Inputs::Uniform)?.1.y()[0]))
        .collect::<Result<_, BenchError>>()?;
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (draws.len() - 1) as f64;
    let rel = (var - hp.signal_variance).abs() / hp.signal_variance;
    Ok(Check::new("prior_variance_matches_signal_variance", rel <= 0.15, format!("sample variance {var:.4}")))
}

fn empty_run() -> Result<Check, BenchError> {
    let cfg = SweepConfig::parse("experiments =\n")?;
    let summary = crate::run(&cfg)?;
    Ok(Check::new(
        "empty_experiment_set_passes",
        summary.passed && summary.experiments.is_empty(),
        format!("{} experiments", summary.experiments.len()),
    ))
}

/// Every self-check, in a fixed order.
pub fn run() -> Result<Vec<Check>, BenchError> {
    let hp = Hyperparams::new(1.0, 0.5, 0.1)?;
    let mut checks = fit_slopes()?;
    checks.push(deterministic_generation(&hp)?);
    checks.push(noiseless_interpolation()?);
    checks.push(prior_variance(&hp)?);
    checks.push(empty_run()?);
    Ok(checks)
}
