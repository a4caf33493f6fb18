//! RBF kernel `σ_f² exp(-r²/2ℓ²)`, its partials in `(σ_f², ℓ)`, and Gram
//! assembly.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Kernel hyperparameters. The optimised coordinates are `θ = (σ_f², ℓ)`;
/// the noise variance stays fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub signal_variance: f64,
    pub lengthscale: f64,
    pub noise_variance: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Hyperparams {
    pub fn new(signal_variance: f64, lengthscale: f64, noise_variance: f64) -> Result<Self> {
        positive("signal variance", signal_variance)?;
        positive("lengthscale", lengthscale)?;
        positive("noise variance", noise_variance)?;
        Ok(Self { signal_variance, lengthscale, noise_variance })
    }

    pub fn theta(&self) -> [f64; 2] {
        [self.signal_variance, self.lengthscale]
    }

    /// Same noise, new `(σ_f², ℓ)`.
    pub fn with_theta(&self, theta: [f64; 2]) -> Result<Self> {
        Self::new(theta[0], theta[1], self.noise_variance)
    }
}

/// Compact box of admissible `(σ_f², ℓ)` values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl ParamBox {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        for i in 0..2 {
            positive("box bound", lo[i])?;
            if !(hi[i] >= lo[i] && hi[i].is_finite()) {
                return Err(Error::InvalidArgument(format!("box upper bound {} below {}", hi[i], lo[i])));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, theta: [f64; 2]) -> bool {
        (0..2).all(|i| theta[i] >= self.lo[i] && theta[i] <= self.hi[i])
    }

    /// Coordinate-wise projection; the flag reports whether anything moved.
    pub fn clip(&self, theta: [f64; 2]) -> ([f64; 2], bool) {
        let out = [0, 1].map(|i| theta[i].clamp(self.lo[i], self.hi[i]));
        (out, out != theta)
    }

    /// `k × k` tensor grid including the corners, first coordinate slowest.
    pub fn lattice(&self, k: usize) -> Vec<[f64; 2]> {
        let axis = |i: usize| -> Vec<f64> {
            if k == 1 {
                return vec![0.5 * (self.lo[i] + self.hi[i])];
            }
            (0..k).map(|j| self.lo[i] + (self.hi[i] - self.lo[i]) * j as f64 / (k - 1) as f64).collect()
        };
        let (a, b) = (axis(0), axis(1));
        a.iter().flat_map(|&s| b.iter().map(move |&l| [s, l])).collect()
    }
}

/// Which kernel hyperparameter a partial derivative is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Param {
    SignalVariance,
    Lengthscale,
}

impl Param {
    pub const ALL: [Param; 2] = [Param::SignalVariance, Param::Lengthscale];

    pub fn index(self) -> usize {
        match self {
            Param::SignalVariance => 0,
            Param::Lengthscale => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::SignalVariance => "signal_variance_sq",
            Param::Lengthscale => "lengthscale",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "signal_variance_sq" | "signal_variance" => Ok(Param::SignalVariance),
            "lengthscale" => Ok(Param::Lengthscale),
            other => Err(Error::InvalidArgument(format!("unknown hyperparameter selector `{other}`"))),
        }
    }
}

/// The kernel itself or one of its hyperparameter partials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelKind {
    Value,
    Partial(Param),
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [
        KernelKind::Value,
        KernelKind::Partial(Param::SignalVariance),
        KernelKind::Partial(Param::Lengthscale),
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Value => "kernel",
            KernelKind::Partial(p) => p.name(),
        }
    }
}

/// One-dimensional factor of a separable term, as a function of the offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor {
    /// `exp(-r²/2ℓ²)`
    Gauss,
    /// `r² exp(-r²/2ℓ²)`
    SquaredGauss,
}

impl Factor {
    pub fn eval(self, r: f64, lengthscale: f64) -> f64 {
        let g = (-0.5 * r * r / (lengthscale * lengthscale)).exp();
        match self {
            Factor::Gauss => g,
            Factor::SquaredGauss => r * r * g,
        }
    }
}

/// `scale · Π_j factors[j](x_j - x'_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableTerm {
    pub scale: f64,
    pub factors: Vec<Factor>,
}

/// Write the kernel (or a partial) in `d` dimensions as a sum of separable
/// terms. The RBF value and its `σ_f²` partial are single products; the
/// `ℓ` partial is a sum of `d` products because `r² = Σ r_j²`.
pub fn separable_terms(hp: &Hyperparams, kind: KernelKind, d: usize) -> Vec<SeparableTerm> {
    let gauss = vec![Factor::Gauss; d];
    match kind {
        KernelKind::Value => vec![SeparableTerm { scale: hp.signal_variance, factors: gauss }],
        KernelKind::Partial(Param::SignalVariance) => vec![SeparableTerm { scale: 1.0, factors: gauss }],
        KernelKind::Partial(Param::Lengthscale) => {
            let scale = hp.signal_variance / hp.lengthscale.powi(3);
            (0..d)
                .map(|j| {
                    let mut factors = gauss.clone();
                    factors[j] = Factor::SquaredGauss;
                    SeparableTerm { scale, factors }
                })
                .collect()
        }
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("points of dimension {} and {}", x.len(), y.len())));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum())
}

#[inline]
fn eval_sq(r2: f64, hp: &Hyperparams, kind: KernelKind) -> f64 {
    let l2 = hp.lengthscale * hp.lengthscale;
    let g = (-0.5 * r2 / l2).exp();
    match kind {
        KernelKind::Value => hp.signal_variance * g,
        KernelKind::Partial(Param::SignalVariance) => g,
        KernelKind::Partial(Param::Lengthscale) => hp.signal_variance * g * r2 / (l2 * hp.lengthscale),
    }
}

/// Kernel or partial evaluated at a pair of points.
pub fn eval(x: &[f64], y: &[f64], hp: &Hyperparams, kind: KernelKind) -> Result<f64> {
    Ok(eval_sq(sq_dist(x, y)?, hp, kind))
}

pub fn rbf(x: &[f64], y: &[f64], hp: &Hyperparams) -> Result<f64> {
    eval(x, y, hp, KernelKind::Value)
}

pub fn rbf_partial(x: &[f64], y: &[f64], hp: &Hyperparams, which: Param) -> Result<f64> {
    eval(x, y, hp, KernelKind::Partial(which))
}

/// Row-major point set with a fixed dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Points {
    d: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn new(d: usize, coords: Vec<f64>) -> Result<Self> {
        if d == 0 || !coords.len().is_multiple_of(d) {
            return Err(Error::Shape(format!("{} coordinates do not split into rows of {d}", coords.len())));
        }
        Ok(Self { d, coords })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("rows of unequal length".into()));
        }
        Self::new(d, rows.concat())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.d)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// Inputs, targets and the halfwidth `D` of the box `[-D, D]^d` holding them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Points,
    y: Vec<f64>,
    domain_halfwidth: f64,
}

impl Dataset {
    pub fn new(x: Points, y: Vec<f64>, domain_halfwidth: f64) -> Result<Self> {
        positive("domain halfwidth", domain_halfwidth)?;
        if x.is_empty() {
            return Err(Error::InvalidArgument("dataset needs at least one point".into()));
        }
        if x.len() != y.len() {
            return Err(Error::Shape(format!("{} inputs but {} targets", x.len(), y.len())));
        }
        for (r, p) in x.rows().enumerate() {
            for (dim, &v) in p.iter().enumerate() {
                if !(v.abs() <= domain_halfwidth) {
                    return Err(Error::OutOfDomain {
                        row: Some(r),
                        dim,
                        value: v,
                        lo: -domain_halfwidth,
                        hi: domain_halfwidth,
                    });
                }
            }
        }
        Ok(Self { x, y, domain_halfwidth })
    }

    pub fn x(&self) -> &Points {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.d()
    }

    pub fn domain_halfwidth(&self) -> f64 {
        self.domain_halfwidth
    }

    /// Same inputs, new targets.
    pub fn with_targets(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(self.x.clone(), y, self.domain_halfwidth)
    }
}

/// `K_ij = k(a_i, b_j)` for the kernel or one of its partials.
pub fn gram_kind(a: &Points, b: &Points, hp: &Hyperparams, kind: KernelKind) -> Result<DMatrix<f64>> {
    if a.d() != b.d() {
        return Err(Error::Shape(format!("point sets of dimension {} and {}", a.d(), b.d())));
    }
    let same = std::ptr::eq(a, b);
    let mut k = DMatrix::zeros(a.len(), b.len());
    for i in 0..a.len() {
        let start = if same { i } else { 0 };
        for j in start..b.len() {
            let r2: f64 = a.row(i).iter().zip(b.row(j)).map(|(p, q)| (p - q) * (p - q)).sum();
            let v = eval_sq(r2, hp, kind);
            k[(i, j)] = v;
            if same {
                k[(j, i)] = v;
            }
        }
    }
    Ok(k)
}

pub fn gram(a: &Points, b: &Points, hp: &Hyperparams) -> Result<DMatrix<f64>> {
    gram_kind(a, b, hp, KernelKind::Value)
}

pub fn gram_partial(x: &Points, hp: &Hyperparams, which: Param) -> Result<DMatrix<f64>> {
    gram_kind(x, x, hp, KernelKind::Partial(which))
}

/// Kernel bound `M = σ_f²` and derivative bound `C` over distances
/// `r ∈ [0, 2D√d]`.
pub fn kernel_constants(hp: &Hyperparams, domain_halfwidth: f64, d: usize) -> (f64, f64) {
    let m = hp.signal_variance;
    let r_max = 2.0 * domain_halfwidth * (d as f64).sqrt();
    let l = hp.lengthscale;
    // σ_f² e^{-s/2} s / ℓ with s = r²/ℓ² peaks at s = 2
    let s = if r_max * r_max >= 2.0 * l * l { 2.0 } else { r_max * r_max / (l * l) };
    let c_len = hp.signal_variance * s * (-0.5 * s).exp() / l;
    (m, c_len.max(1.0))
}
