use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ski_bounds::{BenchError, Experiment, SweepConfig};

#[derive(Parser)]
#[command(name = "ski-bounds", version, about = "Measure SKI approximation errors against their bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write CSV and JSON reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated experiment names; replaces the config list.
        #[arg(long, value_delimiter = ',')]
        experiments: Option<Vec<Experiment>>,
        /// Dimensions, applied to every experiment that sweeps over d.
        #[arg(long, value_delimiter = ',')]
        d: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        /// Inducing points per dimension, for every d.
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', env = "SKI_BOUNDS_SEED")]
        seed: Option<Vec<u64>>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Ascent step size; defaults to 1/μ.
        #[arg(long)]
        step_size: Option<f64>,
    },
    /// Print the calibrated constants as JSON.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in sanity checks.
    Selftest,
}

fn run(cli: Cli) -> Result<bool, BenchError> {
    match cli.command {
        Command::Run { config, experiments, d, n, m, seed, jobs, out, step_size } => {
            let mut cfg = SweepConfig::load(&config)?;
            if let Some(e) = experiments {
                cfg.experiments = e.into_iter().collect();
            }
            if let Some(d) = d {
                cfg.override_dims(d);
            }
            if let Some(n) = n {
                cfg.n_values = n;
            }
            if let Some(m) = m {
                cfg.m_per_dim.set_all(m);
            }
            if let Some(s) = seed {
                cfg.seeds = s;
            }
            if let Some(j) = jobs {
                cfg.jobs = j;
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            if step_size.is_some() {
                cfg.ascent.step_size = step_size;
            }
            let summary = ski_bounds::run(&cfg)?;
            summary.write(&cfg.output)?;
            for exp in &summary.experiments {
                let failed = exp.failures().len();
                let status = if failed == 0 { "ok" } else { "FAILED" };
                println!(
                    "{:<16} {status:<6} {} bounds, {} fits, {} checks",
                    exp.name,
                    exp.reports.len(),
                    exp.fits.len(),
                    exp.checks.len()
                );
                for obs in &exp.observations {
                    println!("  observed {} = {} ({})", obs.name, obs.passed, obs.detail);
                }
            }
            for f in &summary.failures {
                eprintln!("failure: {f}");
            }
            println!("reports written to {}", cfg.output.display());
            Ok(summary.passed)
        }
        Command::Calibrate { config } => {
            let cfg = SweepConfig::load(&config)?;
            let consts: std::collections::BTreeMap<String, _> =
                ski_bounds::calibrate(&cfg)?.into_iter().map(|(d, c)| (format!("d{d}"), c)).collect();
            println!("{}", serde_json::to_string_pretty(&consts)?);
            Ok(true)
        }
        Command::Selftest => {
            let checks = ski_bounds::selftest::run()?;
            for c in &checks {
                println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
