//! Keys cubic convolution on regular lattices.
//!
//! A point `x` inside the domain is interpolated from the 4 nodes at offsets
//! `{-1, 0, 1, 2}` around its left node, independently per dimension; the
//! multivariate weights are the tensor product of the 1-D stencils, so a row
//! of `W` carries `4^d` entries.

use crate::{Error, Result};

/// Stencil offsets relative to the left node of the containing cell.
pub const OFFSETS: [isize; 4] = [-1, 0, 1, 2];

/// Extra nodes on each side of the domain, enough for a full stencil at `±D`.
pub const PAD: usize = 2;

/// Keys cubic convolution kernel.
pub fn cubic_kernel(s: f64) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::InvalidArgument(format!("cubic kernel argument {s} is not finite")));
    }
    Ok(keys(s))
}

#[inline]
pub(crate) fn keys(s: f64) -> f64 {
    let a = s.abs();
    if a < 1.0 {
        (1.5 * a - 2.5) * a * a + 1.0
    } else if a < 2.0 {
        ((-0.5 * a + 2.5) * a - 4.0) * a + 2.0
    } else {
        0.0
    }
}

/// Sum of absolute stencil weights at fractional offset `t ∈ [0, 1]`.
fn abs_weight_sum(t: f64) -> f64 {
    OFFSETS.iter().map(|&k| keys(t - k as f64).abs()).sum()
}

/// Supremum of the 1-D absolute weight sum, by dense sampling of the offset.
pub fn empirical_c() -> f64 {
    const SAMPLES: usize = 20_000;
    (0..=SAMPLES)
        .map(|i| abs_weight_sum(i as f64 / SAMPLES as f64))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Uniform 1-D lattice `lo + i·h`, `i < count`, whose outer `pad` nodes on
/// each side lie outside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    lo: f64,
    h: f64,
    count: usize,
    pad: usize,
}

impl Grid1D {
    pub fn new(lo: f64, h: f64, count: usize, pad: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite() && lo.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid spacing {h} / origin {lo} invalid")));
        }
        if count < 4 || count < 2 * pad + 1 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 4 nodes and room for padding, got {count}"
            )));
        }
        Ok(Self { lo, h, count, pad })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.h
    }

    /// Inclusive span of the unpadded nodes.
    pub fn span(&self) -> (f64, f64) {
        (self.node(self.pad), self.node(self.count - 1 - self.pad))
    }
}

/// Four cubic-convolution weights anchored at `base`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil1D {
    pub base: usize,
    pub weights: [f64; 4],
}

impl Stencil1D {
    /// Node indices paired with their weights.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        OFFSETS
            .iter()
            .zip(self.weights)
            .map(|(&k, w)| ((self.base as isize + k) as usize, w))
    }
}

/// 1-D stencil for `x`; exact nodes produce a one-hot stencil.
pub fn stencil_1d(x: f64, g: &Grid1D) -> Result<Stencil1D> {
    let t = (x - g.lo) / g.h;
    let first = g.pad as f64;
    let last = (g.count - 1 - g.pad) as f64;
    let slack = 64.0 * f64::EPSILON * last;
    if !(t >= first - slack && t <= last + slack) {
        let (lo, hi) = g.span();
        return Err(Error::OutOfDomain { row: None, dim: 0, value: x, lo, hi });
    }
    let nearest = t.round();
    if (t - nearest).abs() <= slack {
        return Ok(Stencil1D { base: nearest as usize, weights: [0.0, 1.0, 0.0, 0.0] });
    }
    let base = t.floor();
    let f = t - base;
    Ok(Stencil1D {
        base: base as usize,
        weights: [keys(f + 1.0), keys(f), keys(1.0 - f), keys(2.0 - f)],
    })
}

/// Regular lattice over `[-D, D]^d` with `m_per_dim` cells per dimension,
/// spacing `h = 2D / m_per_dim` and `PAD` extra nodes on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dims: Vec<Grid1D>,
    domain_halfwidth: f64,
    m_per_dim: usize,
}

impl GridSpec {
    pub fn new(d: usize, m_per_dim: usize, domain_halfwidth: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if m_per_dim == 0 {
            return Err(Error::InvalidArgument("need at least one cell per dimension".into()));
        }
        if !(domain_halfwidth > 0.0 && domain_halfwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!("domain halfwidth {domain_halfwidth}")));
        }
        let h = 2.0 * domain_halfwidth / m_per_dim as f64;
        let lo = -domain_halfwidth - PAD as f64 * h;
        let g = Grid1D::new(lo, h, m_per_dim + 1 + 2 * PAD, PAD)?;
        Ok(Self { dims: vec![g; d], domain_halfwidth, m_per_dim })
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn h(&self) -> f64 {
        self.dims[0].h
    }

    pub fn pad(&self) -> usize {
        PAD
    }

    pub fn domain_halfwidth(&self) -> f64 {
        self.domain_halfwidth
    }

    pub fn m_per_dim(&self) -> usize {
        self.m_per_dim
    }

    pub fn axes(&self) -> &[Grid1D] {
        &self.dims
    }

    /// Node counts per dimension, padding included.
    pub fn counts(&self) -> Vec<usize> {
        self.dims.iter().map(Grid1D::count).collect()
    }

    /// `(2D/h)^d`, the inducing-point count used in the bound formulas.
    pub fn m_unpadded(&self) -> usize {
        self.m_per_dim.pow(self.d() as u32)
    }

    /// Total number of lattice nodes, padding included.
    pub fn m_total(&self) -> usize {
        self.dims.iter().map(Grid1D::count).product()
    }

    /// Coordinates of a node given its flat row-major index.
    pub fn node(&self, mut flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.d()];
        for (j, g) in self.dims.iter().enumerate().rev() {
            out[j] = g.node(flat % g.count);
            flat /= g.count;
        }
        out
    }

    /// Per-dimension stencils of `x`; errors name the offending dimension.
    pub fn stencils(&self, x: &[f64]) -> Result<Vec<Stencil1D>> {
        if x.len() != self.d() {
            return Err(Error::Shape(format!("point has {} coordinates, grid has {}", x.len(), self.d())));
        }
        x.iter()
            .zip(&self.dims)
            .enumerate()
            .map(|(j, (&xj, g))| {
                stencil_1d(xj, g).map_err(|e| match e {
                    Error::OutOfDomain { row, value, lo, hi, .. } => {
                        Error::OutOfDomain { row, dim: j, value, lo, hi }
                    }
                    other => other,
                })
            })
            .collect()
    }
}

/// One row of `W`: flat node indices and tensor-product weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRow {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Expand per-dimension stencils into a `4^d` row, dimension 0 slowest.
fn expand(stencils: &[Stencil1D], counts: &[usize], indices: &mut Vec<usize>, weights: &mut Vec<f64>) {
    let start = indices.len();
    indices.push(0);
    weights.push(1.0);
    for (s, &n) in stencils.iter().zip(counts) {
        let len = indices.len();
        for q in start..len {
            let (i0, w0) = (indices[q], weights[q]);
            for (node, w) in s.entries() {
                indices.push(i0 * n + node);
                weights.push(w0 * w);
            }
        }
        indices.drain(start..len);
        weights.drain(start..len);
    }
}

/// Interpolation weights of a single point.
pub fn weights_nd(x: &[f64], grid: &GridSpec) -> Result<WeightRow> {
    let stencils = grid.stencils(x)?;
    let mut row = WeightRow { indices: Vec::new(), weights: Vec::new() };
    expand(&stencils, &grid.counts(), &mut row.indices, &mut row.weights);
    Ok(row)
}

/// Row-compressed interpolation matrix with exactly `4^d` entries per row.
///
/// The per-dimension stencils are kept alongside the expanded rows so that
/// separable kernels can be contracted dimension by dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeights {
    rows: usize,
    cols: usize,
    d: usize,
    indices: Vec<usize>,
    weights: Vec<f64>,
    stencils: Vec<Stencil1D>,
}

impl SparseWeights {
    /// Build `W` for row-major points (`points.len() = rows·d`).
    pub fn build(points: &[f64], grid: &GridSpec) -> Result<Self> {
        let d = grid.d();
        if !points.len().is_multiple_of(d) {
            return Err(Error::Shape(format!("{} coordinates do not split into rows of {d}", points.len())));
        }
        let rows = points.len() / d;
        let counts = grid.counts();
        let nnz = 4usize.pow(d as u32);
        let mut out = Self {
            rows,
            cols: grid.m_total(),
            d,
            indices: Vec::with_capacity(rows * nnz),
            weights: Vec::with_capacity(rows * nnz),
            stencils: Vec::with_capacity(rows * d),
        };
        for (r, x) in points.chunks_exact(d).enumerate() {
            let st = grid.stencils(x).map_err(|e| e.in_row(r))?;
            expand(&st, &counts, &mut out.indices, &mut out.weights);
            out.stencils.extend(st);
        }
        Ok(out)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz_per_row(&self) -> usize {
        4usize.pow(self.d as u32)
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let k = self.nnz_per_row();
        (&self.indices[r * k..(r + 1) * k], &self.weights[r * k..(r + 1) * k])
    }

    pub fn stencils(&self, r: usize) -> &[Stencil1D] {
        &self.stencils[r * self.d..(r + 1) * self.d]
    }

    /// `W v` for a lattice vector `v`.
    pub fn gather(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!("gather expects {} values, got {}", self.cols, v.len())));
        }
        Ok((0..self.rows)
            .map(|r| {
                let (idx, w) = self.row(r);
                idx.iter().zip(w).map(|(&i, &wi)| wi * v[i]).sum()
            })
            .collect())
    }

    /// `Wᵀ v` for a vector with one value per row.
    pub fn scatter(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::Shape(format!("scatter expects {} values, got {}", self.rows, v.len())));
        }
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            let (idx, w) = self.row(r);
            for (&i, &wi) in idx.iter().zip(w) {
                out[i] += wi * vr;
            }
        }
        Ok(out)
    }

    /// Dense copy, for verification only.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            let (idx, w) = self.row(r);
            for (&i, &wi) in idx.iter().zip(w) {
                m[(r, i)] += wi;
            }
        }
        m
    }
}

/// Interpolate lattice values (row-major, length `m_total`) at `x`.
pub fn interpolate(values: &[f64], x: &[f64], grid: &GridSpec) -> Result<f64> {
    if values.len() != grid.m_total() {
        return Err(Error::Shape(format!(
            "grid has {} nodes but {} values were given",
            grid.m_total(),
            values.len()
        )));
    }
    let row = weights_nd(x, grid)?;
    Ok(row.indices.iter().zip(&row.weights).map(|(&i, &w)| w * values[i]).sum())
}

/// Interpolate a function sampled lazily at the stencil nodes of `x`.
pub fn interpolate_fn(grid: &GridSpec, x: &[f64], f: impl Fn(&[f64]) -> f64) -> Result<f64> {
    let row = weights_nd(x, grid)?;
    Ok(row
        .indices
        .iter()
        .zip(&row.weights)
        .filter(|(_, &w)| w != 0.0)
        .map(|(&i, &w)| w * f(&grid.node(i)))
        .sum())
}
