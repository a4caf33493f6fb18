//! Flat `key = value` sweep configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Lists are comma-joined.
//! Per-dimension overrides use a `.dN` suffix, e.g. `m_per_dim.d2 = 8,16`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ski_core::kernels::{Hyperparams, ParamBox};

use crate::error::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Experiment {
    KernelRate,
    GramRate,
    NGrowth,
    Score,
    InverseAction,
    Logdet,
    Posterior,
    Sizing,
    Regimes,
    Ascent,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::KernelRate,
        Experiment::GramRate,
        Experiment::NGrowth,
        Experiment::Score,
        Experiment::InverseAction,
        Experiment::Logdet,
        Experiment::Posterior,
        Experiment::Sizing,
        Experiment::Regimes,
        Experiment::Ascent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::KernelRate => "kernel_rate",
            Experiment::GramRate => "gram_rate",
            Experiment::NGrowth => "n_growth",
            Experiment::Score => "score",
            Experiment::InverseAction => "inverse_action",
            Experiment::Logdet => "logdet",
            Experiment::Posterior => "posterior",
            Experiment::Sizing => "sizing",
            Experiment::Regimes => "regimes",
            Experiment::Ascent => "ascent",
        }
    }

    /// Experiments measured on the shared bound-cell sweep.
    pub fn uses_bound_cells(self) -> bool {
        matches!(self, Experiment::Score | Experiment::InverseAction | Experiment::Logdet | Experiment::Posterior)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s.trim())
            .ok_or_else(|| BenchError::Config(format!("unknown experiment `{}`", s.trim())))
    }
}

/// A list of values with optional per-dimension replacements.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PerDim<T> {
    pub default: Vec<T>,
    pub by_dim: BTreeMap<usize, Vec<T>>,
}

impl<T: Clone> PerDim<T> {
    fn new(default: Vec<T>, by_dim: &[(usize, Vec<T>)]) -> Self {
        Self { default, by_dim: by_dim.iter().cloned().collect() }
    }

    pub fn get(&self, d: usize) -> &[T] {
        self.by_dim.get(&d).unwrap_or(&self.default)
    }

    /// Replace every list with `values`.
    pub fn set_all(&mut self, values: Vec<T>) {
        self.by_dim.clear();
        self.default = values;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelRateConfig {
    pub dims: Vec<usize>,
    pub m_per_dim: PerDim<usize>,
    pub pairs: usize,
    /// Evaluation points for the 1-D slice.
    pub slice_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramRateConfig {
    pub dims: Vec<usize>,
    pub n: usize,
    pub m_per_dim: PerDim<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGrowthConfig {
    pub n_values: Vec<usize>,
    pub m_per_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizingConfig {
    pub epsilons: Vec<f64>,
    pub n_values: Vec<usize>,
    pub slope_epsilon: f64,
    pub slope_n_values: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimesConfig {
    pub dims: Vec<usize>,
    pub n_values: Vec<usize>,
    pub epsilon: f64,
    pub c_regime: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentConfig {
    pub n: usize,
    pub steps: usize,
    pub m_per_dim: usize,
    pub param_box: ParamBox,
    pub start: [f64; 2],
    /// `None` means `1/μ`.
    pub step_size: Option<f64>,
    pub lattice: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub experiments: BTreeSet<Experiment>,
    pub dims: Vec<usize>,
    pub n_values: Vec<usize>,
    pub m_per_dim: PerDim<usize>,
    pub test_points: usize,
    pub domain_halfwidth: f64,
    pub hp_true: Hyperparams,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub jobs: usize,
    /// Also run every bound cell on lattice-node data.
    pub lattice_cells: bool,
    pub kernel_rate: KernelRateConfig,
    pub gram_rate: GramRateConfig,
    pub n_growth: NGrowthConfig,
    pub sizing: SizingConfig,
    pub regimes: RegimesConfig,
    pub ascent: AscentConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            experiments: Experiment::ALL.into_iter().collect(),
            dims: vec![1, 2],
            n_values: vec![64, 128, 256],
            m_per_dim: PerDim::new(vec![16, 32, 64], &[(2, vec![8, 16, 24])]),
            test_points: 64,
            domain_halfwidth: 1.0,
            hp_true: Hyperparams::new(1.0, 0.5, 0.1).expect("valid defaults"),
            seeds: vec![1, 2, 3],
            output: PathBuf::from("results"),
            jobs: 0,
            lattice_cells: true,
            kernel_rate: KernelRateConfig {
                dims: vec![1, 2],
                m_per_dim: PerDim::new(vec![16, 32, 64, 128, 256], &[(2, vec![8, 16, 32, 64, 128])]),
                pairs: 1000,
                slice_points: 4001,
            },
            gram_rate: GramRateConfig {
                dims: vec![1, 2, 3],
                n: 256,
                m_per_dim: PerDim::new(
                    vec![8, 16, 32, 64, 128],
                    &[(2, vec![6, 8, 12, 16, 24, 32]), (3, vec![4, 6, 8, 12, 16])],
                ),
            },
            n_growth: NGrowthConfig { n_values: vec![64, 128, 256, 512, 1024], m_per_dim: 16 },
            sizing: SizingConfig {
                epsilons: vec![1e-2, 1e-3],
                n_values: vec![128, 256],
                slope_epsilon: 1e-2,
                slope_n_values: vec![64, 128, 256, 512, 1024],
            },
            regimes: RegimesConfig {
                dims: vec![1, 2, 3, 4],
                n_values: vec![1_000, 10_000, 100_000, 1_000_000],
                epsilon: 1e-2,
                c_regime: 1.0,
            },
            ascent: AscentConfig {
                n: 128,
                steps: 200,
                m_per_dim: 32,
                param_box: ParamBox::new([0.5, 0.3], [2.0, 1.0]).expect("valid defaults"),
                start: [1.8, 0.9],
                step_size: None,
                lattice: true,
            },
        }
    }
}

fn parse_one<T: FromStr>(key: &str, raw: &str) -> Result<T, BenchError> {
    raw.trim()
        .parse()
        .map_err(|_| BenchError::Config(format!("{key}: cannot parse `{}`", raw.trim())))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>, BenchError> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|v| parse_one(key, v)).collect()
}

fn parse_pair(key: &str, raw: &str) -> Result<[f64; 2], BenchError> {
    match parse_list::<f64>(key, raw)?.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(BenchError::Config(format!("{key}: expected two comma-separated reals"))),
    }
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, BenchError> {
    match raw.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(BenchError::Config(format!("{key}: expected a boolean, got `{other}`"))),
    }
}

/// Split `base.dN` into `(base, Some(N))`.
fn split_dim(key: &str) -> (&str, Option<usize>) {
    if let Some((base, tail)) = key.rsplit_once(".d") {
        if let Ok(d) = tail.parse() {
            return (base, Some(d));
        }
    }
    (key, None)
}

fn set_per_dim(target: &mut PerDim<usize>, dim: Option<usize>, key: &str, raw: &str) -> Result<(), BenchError> {
    let values = parse_list(key, raw)?;
    match dim {
        Some(d) => {
            target.by_dim.insert(d, values);
        }
        None => target.default = values,
    }
    Ok(())
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let mut cfg = SweepConfig::default();
        let mut box_lo = cfg.ascent.param_box.lo;
        let mut box_hi = cfg.ascent.param_box.hi;
        let (mut s2f, mut ell, mut noise) =
            (cfg.hp_true.signal_variance, cfg.hp_true.lengthscale, cfg.hp_true.noise_variance);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            let (base, dim) = split_dim(key);
            match (base, dim) {
                ("experiments", None) => cfg.experiments = parse_list(key, raw)?.into_iter().collect(),
                ("dims", None) => cfg.dims = parse_list(key, raw)?,
                ("n_values", None) => cfg.n_values = parse_list(key, raw)?,
                ("m_per_dim", _) => set_per_dim(&mut cfg.m_per_dim, dim, key, raw)?,
                ("test_points", None) => cfg.test_points = parse_one(key, raw)?,
                ("domain_halfwidth", None) => cfg.domain_halfwidth = parse_one(key, raw)?,
                ("signal_variance", None) => s2f = parse_one(key, raw)?,
                ("lengthscale", None) => ell = parse_one(key, raw)?,
                ("noise_variance", None) => noise = parse_one(key, raw)?,
                ("seeds", None) => cfg.seeds = parse_list(key, raw)?,
                ("output", None) => cfg.output = PathBuf::from(raw.trim()),
                ("jobs", None) => cfg.jobs = parse_one(key, raw)?,
                ("lattice_cells", None) => cfg.lattice_cells = parse_bool(key, raw)?,
                ("kernel_rate.dims", None) => cfg.kernel_rate.dims = parse_list(key, raw)?,
                ("kernel_rate.m_per_dim", _) => set_per_dim(&mut cfg.kernel_rate.m_per_dim, dim, key, raw)?,
                ("kernel_rate.pairs", None) => cfg.kernel_rate.pairs = parse_one(key, raw)?,
                ("kernel_rate.slice_points", None) => cfg.kernel_rate.slice_points = parse_one(key, raw)?,
                ("gram_rate.dims", None) => cfg.gram_rate.dims = parse_list(key, raw)?,
                ("gram_rate.n", None) => cfg.gram_rate.n = parse_one(key, raw)?,
                ("gram_rate.m_per_dim", _) => set_per_dim(&mut cfg.gram_rate.m_per_dim, dim, key, raw)?,
                ("n_growth.n_values", None) => cfg.n_growth.n_values = parse_list(key, raw)?,
                ("n_growth.m_per_dim", None) => cfg.n_growth.m_per_dim = parse_one(key, raw)?,
                ("sizing.epsilons", None) => cfg.sizing.epsilons = parse_list(key, raw)?,
                ("sizing.n_values", None) => cfg.sizing.n_values = parse_list(key, raw)?,
                ("sizing.slope_epsilon", None) => cfg.sizing.slope_epsilon = parse_one(key, raw)?,
                ("sizing.slope_n_values", None) => cfg.sizing.slope_n_values = parse_list(key, raw)?,
                ("regimes.dims", None) => cfg.regimes.dims = parse_list(key, raw)?,
                ("regimes.n_values", None) => cfg.regimes.n_values = parse_list(key, raw)?,
                ("regimes.epsilon", None) => cfg.regimes.epsilon = parse_one(key, raw)?,
                ("regimes.c_regime", None) => cfg.regimes.c_regime = parse_one(key, raw)?,
                ("ascent.n", None) => cfg.ascent.n = parse_one(key, raw)?,
                ("ascent.steps", None) => cfg.ascent.steps = parse_one(key, raw)?,
                ("ascent.m_per_dim", None) => cfg.ascent.m_per_dim = parse_one(key, raw)?,
                ("ascent.box_lo", None) => box_lo = parse_pair(key, raw)?,
                ("ascent.box_hi", None) => box_hi = parse_pair(key, raw)?,
                ("ascent.start", None) => cfg.ascent.start = parse_pair(key, raw)?,
                ("ascent.step_size", None) => {
                    cfg.ascent.step_size = match raw.trim() {
                        "auto" => None,
                        v => Some(parse_one(key, v)?),
                    }
                }
                ("ascent.lattice", None) => cfg.ascent.lattice = parse_bool(key, raw)?,
                _ => return Err(BenchError::Config(format!("line {}: unknown key `{key}`", lineno + 1))),
            }
        }
        cfg.hp_true = Hyperparams::new(s2f, ell, noise).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.ascent.param_box = ParamBox::new(box_lo, box_hi).map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Replace every dimension list, including the per-experiment ones.
    pub fn override_dims(&mut self, dims: Vec<usize>) {
        self.kernel_rate.dims = dims.clone();
        self.gram_rate.dims = dims.clone();
        self.regimes.dims = dims.clone();
        self.dims = dims;
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        let nonempty_positive = |name: &str, v: &[usize]| -> Result<(), BenchError> {
            if v.is_empty() || v.contains(&0) {
                return Err(BenchError::Config(format!("{name} must be a nonempty list of positive values")));
            }
            Ok(())
        };
        nonempty_positive("dims", &self.dims)?;
        nonempty_positive("n_values", &self.n_values)?;
        for &d in &self.dims {
            nonempty_positive(&format!("m_per_dim.d{d}"), self.m_per_dim.get(d))?;
        }
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty".into());
        }
        if self.test_points == 0 {
            return bad("test_points must be positive".into());
        }
        if !(self.domain_halfwidth > 0.0 && self.domain_halfwidth.is_finite()) {
            return bad(format!("domain_halfwidth must be positive, got {}", self.domain_halfwidth));
        }
        if self.experiments.contains(&Experiment::KernelRate) {
            nonempty_positive("kernel_rate.dims", &self.kernel_rate.dims)?;
            for &d in &self.kernel_rate.dims {
                nonempty_positive("kernel_rate.m_per_dim", self.kernel_rate.m_per_dim.get(d))?;
            }
        }
        if self.experiments.contains(&Experiment::GramRate) {
            nonempty_positive("gram_rate.dims", &self.gram_rate.dims)?;
            for &d in &self.gram_rate.dims {
                nonempty_positive("gram_rate.m_per_dim", self.gram_rate.m_per_dim.get(d))?;
            }
        }
        if self.experiments.contains(&Experiment::NGrowth) {
            nonempty_positive("n_growth.n_values", &self.n_growth.n_values)?;
        }
        if self.experiments.contains(&Experiment::Sizing) {
            nonempty_positive("sizing.n_values", &self.sizing.n_values)?;
            if self.sizing.epsilons.is_empty() || self.sizing.epsilons.iter().any(|e| *e <= 0.0) {
                return bad("sizing.epsilons must be positive".into());
            }
        }
        if self.experiments.contains(&Experiment::Regimes) {
            nonempty_positive("regimes.dims", &self.regimes.dims)?;
            if self.regimes.n_values.iter().any(|&n| n < 3) {
                return bad("regimes.n_values must be at least 3".into());
            }
        }
        if self.experiments.contains(&Experiment::Ascent) {
            if !self.ascent.param_box.contains(self.ascent.start) {
                return bad("ascent.start lies outside the box".into());
            }
            if self.ascent.steps == 0 {
                return bad("ascent.steps must be positive".into());
            }
            if self.ascent.step_size.is_some_and(|e| !(e > 0.0 && e.is_finite())) {
                return bad("ascent.step_size must be positive".into());
            }
        }
        Ok(())
    }
}
