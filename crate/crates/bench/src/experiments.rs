//! The sweep experiments. Each one returns a table, bound reports, rate fits
//! and pass/fail checks; nothing here writes to disk.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use ski_core::bounds::{self, BoundReport, Constants, ProbeSpec};
use ski_core::gp::{self, Mode};
use ski_core::interp::{self, GridSpec};
use ski_core::kernels::{self, Dataset, Hyperparams, Param, ParamBox, Points};
use ski_core::linalg::spectral_norm;
use ski_core::ski::{self, SkiModel};
use ski_core::trainer;
use ski_core::{Error, Result};

use crate::config::{Experiment, SweepConfig};
use crate::data::{generate, Inputs};
use crate::fit::fit_rate;
use crate::report::{CellBound, CellKey, Check, ExperimentOutput, NamedFit, Table, Value};

/// Measured errors on lattice-node data must stay below this.
pub const LATTICE_TOL: f64 = 1e-8;
/// Relative error allowed between the fast and dense SKI products.
pub const MVM_TOL: f64 = 1e-10;
/// Relative error allowed between a score and finite differences of its log-likelihood.
pub const FD_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-5;

/// Distinct, reproducible seed per `(seed, purpose, d, n)`.
pub fn derive_seed(seed: u64, purpose: u64, d: usize, n: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (purpose << 56) ^ ((d as u64) << 40) ^ n as u64
}

const PURPOSE_DATA: u64 = 1;
const PURPOSE_PAIRS: u64 = 2;
const PURPOSE_MVM: u64 = 3;
const PURPOSE_CALIBRATION: u64 = 4;
const PURPOSE_ASCENT: u64 = 5;

fn key_columns(extra: &[&str]) -> Vec<String> {
    CellKey::COLUMNS.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn row(key: &CellKey, extra: Vec<Value>) -> Vec<Value> {
    let mut r = key.values();
    r.extend(extra);
    r
}

fn uniform_points(rng: &mut ChaCha20Rng, count: usize, d: usize, half: f64) -> Result<Points> {
    Points::new(d, (0..count * d).map(|_| rng.random_range(-half..=half)).collect())
}

/// Box around `hp` over which smoothness is probed during calibration.
pub fn calibration_box(hp: &Hyperparams) -> Result<ParamBox> {
    ParamBox::new(
        [0.5 * hp.signal_variance, 0.5 * hp.lengthscale],
        [2.0 * hp.signal_variance, 2.0 * hp.lengthscale],
    )
}

/// Constants for dimension `d` at the configured hyperparameters.
pub fn calibrate_dim(cfg: &SweepConfig, d: usize) -> Result<Constants> {
    let seed = cfg.seeds[0];
    let probe = ProbeSpec::standard(d, cfg.domain_halfwidth, cfg.hp_true, derive_seed(seed, PURPOSE_CALIBRATION, d, 0));
    let (mu_data, _) = generate(
        d,
        32,
        1,
        cfg.domain_halfwidth,
        &cfg.hp_true,
        derive_seed(seed, PURPOSE_CALIBRATION, d, 32),
        Inputs::Uniform,
    )?;
    bounds::calibrate(&probe, &mu_data, &calibration_box(&cfg.hp_true)?)
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn rel_vec_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 { num } else { num / den }
}

/// Relative error of `ski_mvm` against the dense `K̃` on a random vector.
fn mvm_error(model: &SkiModel, k_ski: &DMatrix<f64>, seed: u64) -> Result<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..model.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let fast = ski::ski_mvm(model, &v)?;
    let dense = k_ski * DVector::from_column_slice(&v);
    Ok(rel_vec_err(&fast, dense.as_slice()))
}

fn fit_named(name: String, pts: &[(f64, f64)], window: [f64; 2], r2: Option<f64>) -> Result<NamedFit> {
    Ok(NamedFit::new(name, fit_rate(pts)?, window, r2))
}

// ---------------------------------------------------------------- kernel_rate

enum RateCell {
    Slice { m: usize },
    Ski { d: usize, m: usize, seed: u64 },
}

pub fn kernel_rate(cfg: &SweepConfig) -> Result<ExperimentOutput> {
    let kc = &cfg.kernel_rate;
    let half = cfg.domain_halfwidth;
    let hp = cfg.hp_true;
    let mut cells = Vec::new();
    if kc.dims.contains(&1) {
        cells.extend(kc.m_per_dim.get(1).iter().map(|&m| RateCell::Slice { m }));
    }
    for &d in &kc.dims {
        for &seed in &cfg.seeds {
            cells.extend(kc.m_per_dim.get(d).iter().map(|&m| RateCell::Ski { d, m, seed }));
        }
    }
    let measured: Vec<(CellKey, &'static str, f64, f64)> = cells
        .par_iter()
        .map(|cell| -> Result<_> {
            match *cell {
                RateCell::Slice { m } => {
                    let grid = GridSpec::new(1, m, half)?;
                    let f = |z: &[f64]| kernels::rbf(z, &[0.0], &hp).expect("one-dimensional");
                    let pts = kc.slice_points.max(2);
                    let mut worst = 0.0f64;
                    for i in 0..pts {
                        let x = [-half + 2.0 * half * i as f64 / (pts - 1) as f64];
                        worst = worst.max((interp::interpolate_fn(&grid, &x, f)? - f(&x)).abs());
                    }
                    Ok((CellKey::new(1, pts, m, 0, "slice"), "slice", grid.h(), worst))
                }
                RateCell::Ski { d, m, seed } => {
                    let grid = GridSpec::new(d, m, half)?;
                    let anchor = Dataset::new(Points::new(d, vec![0.0; d])?, vec![0.0], half)?;
                    let model = SkiModel::build(&anchor, &grid, &hp)?;
                    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, PURPOSE_PAIRS, d, kc.pairs));
                    let a = uniform_points(&mut rng, kc.pairs, d, half)?;
                    let b = uniform_points(&mut rng, kc.pairs, d, half)?;
                    let mut worst = 0.0f64;
                    for (x, y) in a.rows().zip(b.rows()) {
                        let err = ski::ski_kernel(&model, x, y)? - kernels::rbf(x, y, &hp)?;
                        worst = worst.max(err.abs());
                    }
                    Ok((CellKey::new(d, kc.pairs, m, seed, "uniform"), "ski_kernel", grid.h(), worst))
                }
            }
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new(&key_columns(&["quantity", "h", "max_error"]));
    for (key, what, h, err) in &measured {
        table.push(row(key, vec![(*what).into(), (*h).into(), (*err).into()]));
    }
    let mut out = ExperimentOutput::new(Experiment::KernelRate.name(), table);

    let slice: Vec<(f64, f64)> = measured.iter().filter(|m| m.1 == "slice").map(|m| (m.2, m.3)).collect();
    if !slice.is_empty() {
        out.fits.push(fit_named("interpolation_slice_d1".into(), &slice, [2.7, 3.3], Some(0.98))?);
    }
    for &d in &kc.dims {
        for &seed in &cfg.seeds {
            let pts: Vec<(f64, f64)> = measured
                .iter()
                .filter(|m| m.1 == "ski_kernel" && m.0.d == d && m.0.seed == seed)
                .map(|m| (m.2, m.3))
                .collect();
            out.fits.push(fit_named(format!("ski_kernel_d{d}_seed{seed}"), &pts, [2.6, 3.4], None)?);
        }
    }
    Ok(out)
}

// ------------------------------------------------------------------ gram_rate

struct GramCell {
    key: CellKey,
    error: f64,
    mvm_rel_err: f64,
}

fn gram_error(cfg: &SweepConfig, d: usize, n: usize, m: usize, seed: u64) -> Result<GramCell> {
    let (data, _) = generate(d, n, 1, cfg.domain_halfwidth, &cfg.hp_true, derive_seed(seed, PURPOSE_DATA, d, n), Inputs::Uniform)?;
    let grid = GridSpec::new(d, m, cfg.domain_halfwidth)?;
    let exact = kernels::gram(data.x(), data.x(), &cfg.hp_true)?;
    let model = SkiModel::build(&data, &grid, &cfg.hp_true)?;
    let approx = ski::ski_gram(&model)?;
    let mvm_rel_err = mvm_error(&model, &approx, derive_seed(seed, PURPOSE_MVM, d, m))?;
    Ok(GramCell { key: CellKey::new(d, n, m, seed, "uniform"), error: spectral_norm(&(approx - exact))?, mvm_rel_err })
}

fn gram_table(cells: &[GramCell]) -> Table {
    let mut table = Table::new(&key_columns(&["gram_spectral_error", "mvm_rel_error"]));
    for c in cells {
        table.push(row(&c.key, vec![c.error.into(), c.mvm_rel_err.into()]));
    }
    table
}

fn mvm_check(cells: &[GramCell]) -> Check {
    let worst = cells.iter().map(|c| c.mvm_rel_err).fold(0.0, f64::max);
    Check::new(
        "structured_mvm_matches_dense",
        worst <= MVM_TOL,
        format!("{} cells, worst relative error {worst:e}", cells.len()),
    )
}

pub fn gram_rate(cfg: &SweepConfig) -> Result<ExperimentOutput> {
    let gc = &cfg.gram_rate;
    let jobs: Vec<(usize, u64, usize)> = gc
        .dims
        .iter()
        .flat_map(|&d| cfg.seeds.iter().flat_map(move |&s| gc.m_per_dim.get(d).iter().map(move |&m| (d, s, m))))
        .collect();
    let cells: Vec<GramCell> =
        jobs.par_iter().map(|&(d, seed, m)| gram_error(cfg, d, gc.n, m, seed)).collect::<Result<_>>()?;
    let mut out = ExperimentOutput::new(Experiment::GramRate.name(), gram_table(&cells));
    for &d in &gc.dims {
        let target = -3.0 / d as f64;
        for &seed in &cfg.seeds {
            let pts: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.key.d == d && c.key.seed == seed)
                .map(|c| (c.key.m_unpadded as f64, c.error))
                .collect();
            out.fits.push(fit_named(format!("gram_vs_m_d{d}_seed{seed}"), &pts, [target - 0.5, target + 0.5], None)?);
        }
    }
    out.checks.push(mvm_check(&cells));
    Ok(out)
}

// ------------------------------------------------------------------- n_growth

pub fn n_growth(cfg: &SweepConfig) -> Result<ExperimentOutput> {
    let nc = &cfg.n_growth;
    let jobs: Vec<(u64, usize)> =
        cfg.seeds.iter().flat_map(|&s| nc.n_values.iter().map(move |&n| (s, n))).collect();
    let cells: Vec<GramCell> =
        jobs.par_iter().map(|&(seed, n)| gram_error(cfg, 1, n, nc.m_per_dim, seed)).collect::<Result<_>>()?;
    let mut out = ExperimentOutput::new(Experiment::NGrowth.name(), gram_table(&cells));
    for &seed in &cfg.seeds {
        let pts: Vec<(f64, f64)> =
            cells.iter().filter(|c| c.key.seed == seed).map(|c| (c.key.n as f64, c.error)).collect();
        out.fits.push(fit_named(format!("gram_vs_n_seed{seed}"), &pts, [0.6, 1.2], None)?);
    }
    out.checks.push(mvm_check(&cells));
    Ok(out)
}

// ---------------------------------------------------------------- bound cells

/// Every quantity measured on one bound cell, next to its bound.
#[derive(Debug, Clone)]
pub struct BoundCell {
    pub key: CellKey,
    pub reports: Vec<(Experiment, BoundReport)>,
    /// Relative error of each score against finite differences, exact then SKI.
    pub fd_rel_err: [f64; 2],
    pub mvm_rel_err: f64,
}

fn fd_score_error(data: &Dataset, hp: &Hyperparams, mode: Mode<'_>) -> Result<f64> {
    let s = gp::score(data, hp, mode)?;
    let mut fd = [0.0; 2];
    for p in Param::ALL {
        let i = p.index();
        let step = FD_STEP * hp.theta()[i];
        let at = |e: f64| -> Result<f64> {
            let mut t = hp.theta();
            t[i] += e;
            gp::log_likelihood(data, &hp.with_theta(t)?, mode)
        };
        fd[i] = (at(step)? - at(-step)?) / (2.0 * step);
    }
    Ok(rel_vec_err(&fd, &s.values))
}

fn inverse(reg: &gp::Regularized) -> DMatrix<f64> {
    reg.factor.inverse()
}

pub fn measure_bound_cell(
    cfg: &SweepConfig,
    consts: &Constants,
    d: usize,
    n: usize,
    m: usize,
    seed: u64,
    lattice: bool,
) -> Result<BoundCell> {
    let hp = cfg.hp_true;
    let half = cfg.domain_halfwidth;
    let t = cfg.test_points;
    let (inputs, label) = if lattice { (Inputs::Lattice { m_per_dim: m }, "lattice") } else { (Inputs::Uniform, "uniform") };
    let data_seed = derive_seed(seed, PURPOSE_DATA, d, n) ^ if lattice { m as u64 } else { 0 };
    let (data, test) = generate(d, n, t, half, &hp, data_seed, inputs)?;
    let grid = GridSpec::new(d, m, half)?;
    let key = CellKey::new(d, n, m, seed, label);
    let mu = grid.m_unpadded();
    let s2 = hp.noise_variance;
    let y = DVector::from_column_slice(data.y());
    let y_norm = y.norm();

    let model = SkiModel::build(&data, &grid, &hp)?;
    let k = kernels::gram(data.x(), data.x(), &hp)?;
    let kt = ski::ski_gram(&model)?;
    let diff = &kt - &k;
    let gram_err = spectral_norm(&diff)?;
    let elem_err = max_abs(&diff);
    let mvm_rel_err = mvm_error(&model, &kt, derive_seed(seed, PURPOSE_MVM, d, n) ^ m as u64)?;

    let partial_err: Vec<f64> = Param::ALL
        .into_iter()
        .map(|p| spectral_norm(&(ski::ski_gram_partial(&model, p)? - kernels::gram_partial(data.x(), &hp, p)?)))
        .collect::<Result<_>>()?;

    let cross_err = spectral_norm(&(ski::ski_cross(&model, test.x())? - kernels::gram(test.x(), data.x(), &hp)?))?;

    let reg = gp::regularized(&data, &hp, Mode::Exact)?;
    let reg_t = gp::regularized(&data, &hp, Mode::Ski(&grid))?;
    let inv_err = spectral_norm(&(inverse(&reg_t) - inverse(&reg)))?;
    let action_err = rel_vec_err(&reg_t.alpha, &reg.alpha) * DVector::from_column_slice(&reg.alpha).norm();
    let logdet_err = (reg_t.factor.log_det() - reg.factor.log_det()).abs();

    let (ll, score) = gp::log_likelihood_and_score(&data, &hp, Mode::Exact)?;
    let (ll_t, score_t) = gp::log_likelihood_and_score(&data, &hp, Mode::Ski(&grid))?;
    let loglik_err = (ll_t - ll).abs();
    let score_err = score.distance(&score_t);
    let fd_rel_err = [fd_score_error(&data, &hp, Mode::Exact)?, fd_score_error(&data, &hp, Mode::Ski(&grid))?];

    let post = gp::posterior(&data, test.x(), &hp, Mode::Exact)?;
    let post_t = gp::posterior(&data, test.x(), &hp, Mode::Ski(&grid))?;
    let (mean_err, cov_err) = gp::posterior_deviation(&post, &post_t)?;

    let gamma = bounds::gamma(n, mu, d, half, consts)?;
    let mut reports = vec![
        // With a single row, γ reduces to the elementwise bound (1 + √L c^d) δ.
        (Experiment::InverseAction, BoundReport::new("elementwise", bounds::gamma(1, mu, d, half, consts)?, elem_err, "(1 + sqrt(L) c^d) K' c^(2d) h^3")),
        (Experiment::InverseAction, BoundReport::new("gram_gamma", gamma, gram_err, "n (1 + sqrt(L) c^d) delta")),
        (Experiment::InverseAction, BoundReport::new("regularized_inverse", bounds::inverse_action_bound(gamma, s2), inv_err, "gamma / sigma^4")),
        (
            Experiment::InverseAction,
            BoundReport::new("inverse_action", bounds::inverse_action_bound(gamma, s2) * y_norm, action_err, "gamma ||y|| / sigma^4"),
        ),
        (Experiment::Logdet, BoundReport::new("logdet", bounds::logdet_bound(gamma, s2), logdet_err, "gamma / sigma^2")),
        (
            Experiment::Logdet,
            BoundReport::new("loglik", bounds::loglik_bound(gamma, y_norm, s2), loglik_err, "(gamma ||y||^2 / sigma^4 + gamma / sigma^2) / 2"),
        ),
    ];
    for (p, err) in Param::ALL.into_iter().zip(&partial_err) {
        reports.push((
            Experiment::Score,
            BoundReport::new(
                format!("gram_partial_gamma_{}", p.name()),
                bounds::gamma_partial(n, mu, d, half, consts, p)?,
                *err,
                "n (1 + sqrt(L) c^d) K'_theta c^(2d) h^3",
            ),
        ));
    }
    reports.push((
        Experiment::Score,
        BoundReport::new(
            "score_eps_g",
            bounds::score_error_bound(n, mu, d, half, consts, y_norm, s2)?,
            score_err,
            "score deviation bound from gamma and gamma'",
        ),
    ));
    reports.extend([
        (
            Experiment::Posterior,
            BoundReport::new("cross_kernel", bounds::cross_kernel_bound(n, t, mu, d, half, consts)?, cross_err, "max(gamma_T, gamma_n)"),
        ),
        (
            Experiment::Posterior,
            BoundReport::new(
                "posterior_mean",
                bounds::posterior_mean_bound(n, t, mu, d, half, consts, y_norm, s2)?,
                mean_err,
                "(max(gamma_T, gamma_n) / sigma^2 + sqrt(Tn) M c^(2d) gamma_n / sigma^4) ||y||",
            ),
        ),
        (
            Experiment::Posterior,
            BoundReport::new(
                "posterior_cov",
                bounds::posterior_cov_bound(n, t, mu, d, half, consts, s2)?,
                cov_err,
                "predictive covariance deviation bound",
            ),
        ),
    ]);
    Ok(BoundCell { key, reports, fd_rel_err, mvm_rel_err })
}

pub fn bound_cells(cfg: &SweepConfig, consts: &BTreeMap<usize, Constants>) -> Result<Vec<BoundCell>> {
    let mut jobs = Vec::new();
    for &d in &cfg.dims {
        for &n in &cfg.n_values {
            for &m in cfg.m_per_dim.get(d) {
                for &seed in &cfg.seeds {
                    jobs.push((d, n, m, seed, false));
                    if cfg.lattice_cells {
                        jobs.push((d, n, m, seed, true));
                    }
                }
            }
        }
    }
    jobs.par_iter()
        .map(|&(d, n, m, seed, lattice)| {
            let c = consts.get(&d).ok_or_else(|| Error::Calibration(format!("no constants for d = {d}")))?;
            measure_bound_cell(cfg, c, d, n, m, seed, lattice)
        })
        .collect()
}

/// Split the shared cells into one output per requested bound experiment.
pub fn bound_outputs(cfg: &SweepConfig, cells: &[BoundCell]) -> BTreeMap<Experiment, ExperimentOutput> {
    let mut outs = BTreeMap::new();
    for exp in cfg.experiments.iter().copied().filter(|e| e.uses_bound_cells()) {
        let names: Vec<String> = cells
            .first()
            .map(|c| c.reports.iter().filter(|r| r.0 == exp).map(|r| r.1.name.clone()).collect())
            .unwrap_or_default();
        let mut extra: Vec<String> = names.iter().flat_map(|n| [format!("{n}_measured"), format!("{n}_bound")]).collect();
        if exp == Experiment::Score {
            extra.extend(["fd_rel_error_exact".into(), "fd_rel_error_ski".into()]);
        }
        if exp == Experiment::InverseAction {
            extra.push("mvm_rel_error".into());
        }
        let extra_refs: Vec<&str> = extra.iter().map(String::as_str).collect();
        let mut table = Table::new(&key_columns(&extra_refs));
        let mut out_reports = Vec::new();
        let mut lattice_worst = 0.0f64;
        let mut lattice_count = 0;
        for c in cells {
            let mine: Vec<&BoundReport> = c.reports.iter().filter(|r| r.0 == exp).map(|r| &r.1).collect();
            let mut vals: Vec<Value> = mine.iter().flat_map(|r| [r.measured.into(), r.theoretical.into()]).collect();
            if exp == Experiment::Score {
                vals.extend([c.fd_rel_err[0].into(), c.fd_rel_err[1].into()]);
            }
            if exp == Experiment::InverseAction {
                vals.push(c.mvm_rel_err.into());
            }
            table.push(row(&c.key, vals));
            if c.key.data == "lattice" {
                lattice_count += 1;
                lattice_worst = mine.iter().map(|r| r.measured).fold(lattice_worst, f64::max);
            }
            out_reports.extend(mine.into_iter().map(|r| CellBound { cell: c.key.clone(), report: r.clone() }));
        }
        let mut out = ExperimentOutput::new(exp.name(), table);
        out.reports = out_reports;
        if lattice_count > 0 {
            out.checks.push(Check::new(
                "lattice_data_is_exact",
                lattice_worst < LATTICE_TOL,
                format!("{lattice_count} lattice cells, largest measured error {lattice_worst:e}"),
            ));
        }
        if exp == Experiment::Score {
            let worst = cells.iter().flat_map(|c| c.fd_rel_err).fold(0.0, f64::max);
            out.checks.push(Check::new(
                "scores_match_finite_differences",
                worst < FD_TOL,
                format!("worst relative error {worst:e} over both modes"),
            ));
        }
        if exp == Experiment::InverseAction {
            let worst = cells.iter().map(|c| c.mvm_rel_err).fold(0.0, f64::max);
            out.checks.push(Check::new(
                "structured_mvm_matches_dense",
                worst <= MVM_TOL,
                format!("{} cells, worst relative error {worst:e}", cells.len()),
            ));
        }
        outs.insert(exp, out);
    }
    outs
}

// --------------------------------------------------------------------- sizing

pub fn sizing(cfg: &SweepConfig, consts: &Constants) -> Result<ExperimentOutput> {
    let sc = &cfg.sizing;
    let half = cfg.domain_halfwidth;
    let hp = cfg.hp_true;
    let mut jobs = Vec::new();
    for &eps in &sc.epsilons {
        for &n in &sc.n_values {
            for &seed in &cfg.seeds {
                jobs.push((eps, n, seed));
            }
        }
    }
    let sized: Vec<(f64, GramCell)> = jobs
        .par_iter()
        .map(|&(eps, n, seed)| {
            let m = bounds::inducing_count(n, eps, 1, half, consts)?;
            Ok((eps, gram_error(cfg, 1, n, m, seed)?))
        })
        .collect::<Result<_>>()?;

    let slope_jobs: Vec<(usize, u64)> =
        cfg.seeds.iter().flat_map(|&s| sc.slope_n_values.iter().map(move |&n| (n, s))).collect();
    let growth: Vec<(CellKey, f64, f64)> = slope_jobs
        .par_iter()
        .map(|&(n, seed)| {
            let m = bounds::inducing_count(n, sc.slope_epsilon, 1, half, consts)?;
            let (data, _) = generate(1, n, 1, half, &hp, derive_seed(seed, PURPOSE_DATA, 1, n), Inputs::Uniform)?;
            let y_norm = data.y().iter().map(|v| v * v).sum::<f64>().sqrt();
            let eps_g = bounds::score_error_bound(n, m, 1, half, consts, y_norm, hp.noise_variance)?;
            Ok((CellKey::new(1, n, m, seed, "uniform"), eps_g, y_norm))
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new(&key_columns(&["part", "epsilon", "gram_spectral_error", "eps_g", "y_norm"]));
    let mut reports = Vec::new();
    for (eps, c) in &sized {
        table.push(row(&c.key, vec!["sized_gram".into(), (*eps).into(), c.error.into(), f64::NAN.into(), f64::NAN.into()]));
        reports.push(CellBound {
            cell: c.key.clone(),
            report: BoundReport::new("sized_gram", *eps, c.error, "m = inducing_count(n, eps)"),
        });
    }
    for (key, eps_g, y_norm) in &growth {
        table.push(row(key, vec!["eps_g_growth".into(), sc.slope_epsilon.into(), f64::NAN.into(), (*eps_g).into(), (*y_norm).into()]));
    }
    let mut out = ExperimentOutput::new(Experiment::Sizing.name(), table);
    out.reports = reports;
    for &seed in &cfg.seeds {
        let pts: Vec<(f64, f64)> =
            growth.iter().filter(|g| g.0.seed == seed).map(|g| (g.0.n as f64, g.1 / g.2)).collect();
        if pts.len() >= 3 {
            out.fits.push(fit_named(format!("eps_g_over_y_vs_n_seed{seed}"), &pts, [0.6, 1.4], None)?);
        }
    }
    Ok(out)
}

// -------------------------------------------------------------------- regimes

pub fn regimes(cfg: &SweepConfig, consts: &BTreeMap<usize, Constants>) -> Result<ExperimentOutput> {
    let rc = &cfg.regimes;
    let half = cfg.domain_halfwidth;
    let mut table = Table::new(&key_columns(&["epsilon_threshold", "m_log_m_over_n"]));
    let mut out = ExperimentOutput::new(Experiment::Regimes.name(), Table::default());
    out.series.insert("n_values".into(), rc.n_values.iter().map(|&n| n as f64).collect());
    for &d in &rc.dims {
        let c = consts.get(&d).ok_or_else(|| Error::Calibration(format!("no constants for d = {d}")))?;
        let eps: Vec<f64> =
            rc.n_values.iter().map(|&n| bounds::linear_time_epsilon(n, d, half, c, rc.c_regime)).collect::<Result<_>>()?;
        let sized: Vec<Option<(usize, f64)>> = rc
            .n_values
            .iter()
            .map(|&n| -> Result<Option<(usize, f64)>> {
                if d > 3 {
                    return Ok(None);
                }
                let m = bounds::inducing_count(n, rc.epsilon, d, half, c)?;
                Ok(Some((m, m as f64 * (m as f64).ln() / n as f64)))
            })
            .collect::<Result<_>>()?;
        for ((&n, e), s) in rc.n_values.iter().zip(&eps).zip(&sized) {
            let (m_per_dim, ratio) = match s {
                Some((m, r)) => ((*m as f64).powf(1.0 / d as f64).round() as usize, *r),
                None => (0, f64::NAN),
            };
            let mut key = CellKey::new(d, n, m_per_dim, 0, "formula");
            if m_per_dim == 0 {
                key.m_unpadded = 0;
                key.m_total = 0;
            }
            table.push(row(&key, vec![(*e).into(), ratio.into()]));
        }
        out.series.insert(format!("epsilon_threshold.d{d}"), eps.clone());
        let (name, passed) = match d {
            1 | 2 => ("epsilon_threshold_decreasing", eps.windows(2).all(|w| w[1] < w[0])),
            3 => {
                let per_log: Vec<f64> = eps.iter().zip(&rc.n_values).map(|(e, &n)| e / (n as f64).ln()).collect();
                ("epsilon_threshold_constant_up_to_log", per_log.iter().all(|v| (v - per_log[0]).abs() <= 1e-9 * per_log[0].abs()))
            }
            _ => ("epsilon_threshold_increasing", eps.windows(2).all(|w| w[1] > w[0])),
        };
        out.checks.push(Check::new(format!("{name}_d{d}"), passed, format!("{eps:?}")));

        if d <= 3 {
            let ratios: Vec<f64> = sized.iter().map(|s| s.map_or(f64::NAN, |v| v.1)).collect();
            out.series.insert(format!("m_log_m_over_n.d{d}"), ratios.clone());
            let tail = &ratios[ratios.len().saturating_sub(2)..];
            let decreasing = tail.len() == 2 && tail[1] < tail[0];
            let check = Check::new(format!("m_log_m_over_n_decreasing_d{d}"), decreasing, format!("{ratios:?}"));
            if d <= 2 {
                out.checks.push(check);
            } else {
                // m grows like n here, so m·log m / n grows like log n.
                out.observations.push(check);
            }
        }
    }
    out.table = table;
    Ok(out)
}

// --------------------------------------------------------------------- ascent

pub struct AscentRun {
    pub label: &'static str,
    pub trajectory: trainer::Trajectory,
    pub mu: f64,
    pub eps_g: f64,
    pub l_star: f64,
    pub certificate: f64,
}

fn ascent_run(cfg: &SweepConfig, seed: u64, lattice: bool) -> Result<AscentRun> {
    let ac = &cfg.ascent;
    let half = cfg.domain_halfwidth;
    let hp = cfg.hp_true;
    let bx = ac.param_box;
    let (inputs, label) =
        if lattice { (Inputs::Lattice { m_per_dim: ac.m_per_dim }, "lattice") } else { (Inputs::Uniform, "uniform") };
    let (data, _) = generate(1, ac.n, 1, half, &hp, derive_seed(seed, PURPOSE_ASCENT, 1, ac.n) ^ lattice as u64, inputs)?;
    let grid = GridSpec::new(1, ac.m_per_dim, half)?;
    // Kernel constants are largest at the largest σ_f² and smallest ℓ of the box.
    let worst = Hyperparams::new(bx.hi[0], bx.lo[1], hp.noise_variance)?;
    let probe = ProbeSpec::standard(1, half, worst, derive_seed(seed, PURPOSE_CALIBRATION, 1, ac.n));
    let consts = bounds::calibrate(&probe, &data, &bx)?;
    let mu = consts.mu;
    let y_norm = data.y().iter().map(|v| v * v).sum::<f64>().sqrt();
    let eps_g = if lattice {
        0.0
    } else {
        bounds::score_error_bound(ac.n, grid.m_unpadded(), 1, half, &consts, y_norm, hp.noise_variance)?
    };
    let eta = ac.step_size.unwrap_or(1.0 / mu);
    let theta0 = Hyperparams::new(ac.start[0], ac.start[1], hp.noise_variance)?;
    let trajectory = trainer::ascend(&data, &theta0, eta, ac.steps, &grid, &bx)?;
    if let Some(e) = &trajectory.error {
        return Err(Error::InvalidArgument(format!("ascent stopped early: {e}")));
    }
    let (_, grid_max) = trainer::estimate_max_loglik(&data, hp.noise_variance, &bx, mu, 33, 20)?;
    let l_star = trajectory.iterates.iter().map(|it| it.exact_loglik).fold(grid_max, f64::max);
    let l0 = trajectory.iterates[0].exact_loglik;
    let certificate = bounds::ascent_certificate(mu, l_star, l0, ac.steps, eps_g)?;
    Ok(AscentRun { label, trajectory, mu, eps_g, l_star, certificate })
}

pub fn ascent(cfg: &SweepConfig) -> Result<ExperimentOutput> {
    let seed = cfg.seeds[0];
    let cases: Vec<bool> = if cfg.ascent.lattice { vec![false, true] } else { vec![false] };
    let runs: Vec<AscentRun> = cases.par_iter().map(|&l| ascent_run(cfg, seed, l)).collect::<Result<_>>()?;
    let ac = &cfg.ascent;
    let mut table = Table::new(&key_columns(&[
        "k",
        "signal_variance",
        "lengthscale",
        "ski_loglik",
        "exact_loglik",
        "grad_norm_sq",
        "running_min",
        "clipped",
    ]));
    let mut out = ExperimentOutput::new(Experiment::Ascent.name(), Table::default());
    for run in &runs {
        let key = CellKey::new(1, ac.n, ac.m_per_dim, seed, run.label);
        let rm = run.trajectory.running_min();
        for (k, (it, best)) in run.trajectory.iterates.iter().zip(&rm).enumerate() {
            table.push(row(
                &key,
                vec![
                    k.into(),
                    it.theta.signal_variance.into(),
                    it.theta.lengthscale.into(),
                    it.ski_loglik.into(),
                    it.exact_loglik.into(),
                    (it.exact_grad_norm * it.exact_grad_norm).into(),
                    (*best).into(),
                    it.clipped.into(),
                ],
            ));
        }
        let min_sq = run.trajectory.min_grad_norm_sq();
        let tol = if run.label == "lattice" { 1e-12 } else { 0.0 };
        out.reports.push(CellBound {
            cell: key.clone(),
            report: BoundReport::new(
                "ascent_certificate",
                run.certificate + tol,
                min_sq,
                "2 mu (L* - L(theta0)) / K + eps_g^2 / (2 mu)",
            ),
        });
        out.checks.push(Check::new(
            format!("running_min_nonincreasing_{}", run.label),
            rm.windows(2).all(|w| w[1] <= w[0]),
            format!("final {:e}", rm.last().copied().unwrap_or(f64::NAN)),
        ));
        if run.label == "uniform" {
            out.checks.push(Check::new(
                "plateau_within_twice_certificate",
                rm.last().is_some_and(|v| *v <= 2.0 * run.certificate),
                format!("final running min {:e}, certificate {:e}", min_sq, run.certificate),
            ));
        }
        out.observations.push(Check::new(
            format!("clipping_activated_{}", run.label),
            run.trajectory.clipping_activated(),
            format!("mu {:e}, step {:e}, eps_g {:e}, L* {:.6}", run.mu, run.trajectory.step_size, run.eps_g, run.l_star),
        ));
        out.series.insert(format!("running_min.{}", run.label), rm);
    }
    out.table = table;
    Ok(out)
}
