//! Dense symmetric factorisations, spectral norms, Gaussian sampling and the
//! FFT-based lattice kernel operator.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use crate::{Error, Result};

/// Seed of the power-iteration start vector.
const POWER_SEED: u64 = 0x5EED_0F_5EC7;

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 10_000;

/// Square matrix that is symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    /// Accepts `a` if its asymmetry is below `1e-12` relative to its largest
    /// entry, then replaces it with `(a + aᵀ)/2`.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Shape(format!("{}×{} matrix is not square", a.nrows(), a.ncols())));
        }
        let scale = a.amax();
        let n = a.nrows();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..j {
                worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
            }
        }
        if worst > 1e-12 * scale {
            return Err(Error::InvalidArgument(format!(
                "matrix asymmetry {worst:e} exceeds tolerance relative to {scale:e}"
            )));
        }
        let sym = (&a + a.transpose()) * 0.5;
        Ok(Self(sym))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// `self + s·I`
    pub fn add_diagonal(&self, s: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += s;
        }
        Self(m)
    }
}

/// Cholesky factor `A + jitter·I = L Lᵀ`.
///
/// Stored as `R = Lᵀ` in column-major order so that the inner products of
/// the factorisation run over contiguous memory.
#[derive(Clone)]
pub struct Cholesky {
    r: DMatrix<f64>,
    jitter: f64,
}

impl fmt::Debug for Cholesky {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cholesky").field("order", &self.order()).field("jitter", &self.jitter).finish()
    }
}

impl Cholesky {
    /// Single attempt with a fixed diagonal shift.
    pub fn factor(a: &SymmetricMatrix, jitter: f64) -> Result<Self> {
        let a = a.matrix();
        let n = a.nrows();
        let mut r = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let (ci, cj) = (r.column(i), r.column(j));
                let dot: f64 = ci.rows(0, i).dot(&cj.rows(0, i));
                if i < j {
                    r[(i, j)] = (a[(i, j)] - dot) / r[(i, i)];
                } else {
                    let pivot = a[(j, j)] + jitter - dot;
                    if !(pivot > 0.0 && pivot.is_finite()) {
                        return Err(Error::NotPositiveDefinite { index: j, pivot, jitter });
                    }
                    r[(j, j)] = pivot.sqrt();
                }
            }
        }
        Ok(Self { r, jitter })
    }

    pub fn order(&self) -> usize {
        self.r.nrows()
    }

    /// Diagonal shift that made the factorisation succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular factor `L`.
    pub fn lower(&self) -> DMatrix<f64> {
        self.r.transpose()
    }

    fn forward(&self, b: &mut [f64]) {
        // L y = b with L = Rᵀ: row i of L is column i of R
        for i in 0..b.len() {
            let col = self.r.column(i);
            let s: f64 = col.rows(0, i).iter().zip(&b[..i]).map(|(a, c)| a * c).sum();
            b[i] = (b[i] - s) / self.r[(i, i)];
        }
    }

    fn backward(&self, b: &mut [f64]) {
        // R x = y, column-oriented
        for j in (0..b.len()).rev() {
            b[j] /= self.r[(j, j)];
            let xj = b[j];
            let col = self.r.column(j);
            for (bi, rij) in b[..j].iter_mut().zip(col.rows(0, j).iter()) {
                *bi -= rij * xj;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.order() {
            return Err(Error::Shape(format!("right-hand side of length {} for order {}", b.len(), self.order())));
        }
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        Ok(x)
    }

    /// Solve for every column of `b`.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.order() {
            return Err(Error::Shape(format!("{} rows for order {}", b.nrows(), self.order())));
        }
        let mut out = b.clone();
        for mut col in out.column_iter_mut() {
            let s = col.as_mut_slice();
            self.forward(s);
            self.backward(s);
        }
        Ok(out)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let mut inv = self.solve_matrix(&DMatrix::identity(self.order(), self.order())).expect("square");
        inv = (&inv + inv.transpose()) * 0.5;
        inv
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.r.diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// `L v`
    pub fn lower_mul(&self, v: &[f64]) -> Vec<f64> {
        let n = self.order();
        (0..n)
            .map(|i| self.r.column(i).rows(0, i + 1).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Factor with the jitter ladder `{0, 1e-10, 1e-8, 1e-6}·trace/n`.
pub fn cholesky(a: &SymmetricMatrix) -> Result<Cholesky> {
    let n = a.order();
    if n == 0 {
        return Err(Error::Shape("empty matrix".into()));
    }
    let scale = a.matrix().trace() / n as f64;
    let mut last = None;
    for rel in [0.0, 1e-10, 1e-8, 1e-6] {
        match Cholesky::factor(a, rel * scale.abs()) {
            Ok(c) => return Ok(c),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("ladder is nonempty"))
}

/// Largest singular value by power iteration on `AᵀA`, started from a
/// fixed pseudo-random vector.
pub fn spectral_norm_with(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<f64> {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return Ok(0.0);
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(POWER_SEED);
    let mut v = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..max_iter {
        let w = a * &v;
        let z = a.tr_mul(&w);
        let zn = z.norm();
        if zn == 0.0 {
            return Ok(w.norm());
        }
        // ‖Av‖ ≤ √‖AᵀAv‖ ≤ σ_max for unit v
        let next = zn.sqrt();
        v = z / zn;
        if (next - est).abs() <= tol * next {
            return Ok(next);
        }
        est = next;
    }
    Err(Error::NoConvergence { iterations: max_iter, estimate: est })
}

/// [`spectral_norm_with`] at tolerance `1e-10` and at most 10 000 iterations.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    spectral_norm_with(a, POWER_TOL, POWER_MAX_ITER)
}

/// Draw `L z` with `z` standard normal from a ChaCha20 stream.
pub fn sample_mvn(factor: &Cholesky, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    sample_mvn_from(factor, &mut rng)
}

pub fn sample_mvn_from<R: rand::Rng + ?Sized>(factor: &Cholesky, rng: &mut R) -> Vec<f64> {
    let z: Vec<f64> = (0..factor.order()).map(|_| StandardNormal.sample(rng)).collect();
    factor.lower_mul(&z)
}

/// Symmetric Toeplitz matrix applied through a circulant of size `2n`.
#[derive(Clone)]
pub struct ToeplitzEmbedding {
    n: usize,
    size: usize,
    eig: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for ToeplitzEmbedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToeplitzEmbedding").field("n", &self.n).finish()
    }
}

impl ToeplitzEmbedding {
    pub fn new(column: &[f64], planner: &mut FftPlanner<f64>) -> Self {
        let n = column.len();
        let size = (2 * n).next_power_of_two();
        let mut c = vec![Complex64::new(0.0, 0.0); size];
        for (k, &t) in column.iter().enumerate() {
            c[k].re = t;
            if k > 0 {
                c[size - k].re = t;
            }
        }
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        fwd.process(&mut c);
        Self { n, size, eig: c, fwd, inv }
    }

    /// Apply to `x` in place; `buf` is scratch of the embedding size.
    fn apply(&self, x: &mut [f64], buf: &mut [Complex64]) {
        let size = self.size;
        for (b, &v) in buf.iter_mut().zip(x.iter()) {
            *b = Complex64::new(v, 0.0);
        }
        for b in &mut buf[self.n..size] {
            *b = Complex64::new(0.0, 0.0);
        }
        self.fwd.process(buf);
        for (b, e) in buf.iter_mut().zip(&self.eig) {
            *b *= e;
        }
        self.inv.process(buf);
        let norm = 1.0 / size as f64;
        for (v, b) in x.iter_mut().zip(buf.iter()) {
            *v = b.re * norm;
        }
    }
}

/// `scale · T_0 ⊗ T_1 ⊗ … ⊗ T_{d-1}` with symmetric Toeplitz factors.
#[derive(Debug, Clone)]
pub struct KroneckerTerm {
    pub scale: f64,
    columns: Vec<Vec<f64>>,
    embeddings: Vec<ToeplitzEmbedding>,
}

impl KroneckerTerm {
    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }
}

/// Stationary kernel on a regular lattice, held as a sum of Kronecker
/// products of per-dimension Toeplitz matrices (row-major node order).
#[derive(Debug, Clone)]
pub struct GridKernelOperator {
    counts: Vec<usize>,
    terms: Vec<KroneckerTerm>,
}

impl GridKernelOperator {
    /// `terms` pairs a scale with one first Toeplitz column per dimension.
    pub fn new(terms: Vec<(f64, Vec<Vec<f64>>)>) -> Result<Self> {
        let counts: Vec<usize> = match terms.first() {
            Some((_, cols)) => cols.iter().map(Vec::len).collect(),
            None => return Err(Error::InvalidArgument("operator needs at least one term".into())),
        };
        if counts.is_empty() || counts.contains(&0) {
            return Err(Error::InvalidArgument("empty Toeplitz column".into()));
        }
        let mut planner = FftPlanner::new();
        let terms = terms
            .into_iter()
            .map(|(scale, columns)| {
                let lens: Vec<usize> = columns.iter().map(Vec::len).collect();
                if lens != counts {
                    return Err(Error::Shape(format!("term node counts {lens:?} differ from {counts:?}")));
                }
                let embeddings = columns.iter().map(|c| ToeplitzEmbedding::new(c, &mut planner)).collect();
                Ok(KroneckerTerm { scale, columns, embeddings })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { counts, terms })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn order(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn terms(&self) -> &[KroneckerTerm] {
        &self.terms
    }

    /// Entry between two nodes given by per-dimension indices.
    pub fn entry(&self, a: &[usize], b: &[usize]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.scale
                    * t.columns
                        .iter()
                        .zip(a.iter().zip(b))
                        .map(|(c, (&i, &j))| c[i.abs_diff(j)])
                        .product::<f64>()
            })
            .sum()
    }

    fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.counts.len()];
        for (j, &n) in self.counts.iter().enumerate().rev() {
            idx[j] = flat % n;
            flat /= n;
        }
        idx
    }

    /// Dense copy, for verification only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.order();
        let idx: Vec<Vec<usize>> = (0..m).map(|f| self.multi_index(f)).collect();
        DMatrix::from_fn(m, m, |i, j| self.entry(&idx[i], &idx[j]))
    }
}

/// Apply a Toeplitz factor along one axis of a row-major tensor.
fn apply_axis(x: &mut [f64], counts: &[usize], axis: usize, emb: &ToeplitzEmbedding) {
    let n = counts[axis];
    let inner: usize = counts[axis + 1..].iter().product();
    let outer: usize = counts[..axis].iter().product();
    let mut fiber = vec![0.0; n];
    let mut buf = vec![Complex64::new(0.0, 0.0); emb.size];
    for o in 0..outer {
        let base = o * n * inner;
        for i in 0..inner {
            for (l, f) in fiber.iter_mut().enumerate() {
                *f = x[base + i + l * inner];
            }
            emb.apply(&mut fiber, &mut buf);
            for (l, f) in fiber.iter().enumerate() {
                x[base + i + l * inner] = *f;
            }
        }
    }
}

/// `K_U v` in `O(m log m)` via per-axis circulant embeddings.
pub fn grid_mvm(op: &GridKernelOperator, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != op.order() {
        return Err(Error::Shape(format!("vector of length {} for operator of order {}", v.len(), op.order())));
    }
    let mut out = vec![0.0; v.len()];
    for term in &op.terms {
        let mut x = v.to_vec();
        for (axis, emb) in term.embeddings.iter().enumerate() {
            apply_axis(&mut x, &op.counts, axis, emb);
        }
        for (o, xi) in out.iter_mut().zip(&x) {
            *o += term.scale * xi;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_norm() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -5.0, 1.0]));
        assert!((spectral_norm(&a).unwrap() - 5.0).abs() < 1e-9);
        assert_eq!(spectral_norm(&DMatrix::zeros(4, 4)).unwrap(), 0.0);
    }

    #[test]
    fn small_cholesky() {
        let a = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        let c = cholesky(&a).unwrap();
        assert!((c.log_det() - 36f64.ln()).abs() < 1e-14);
        let x = c.solve(&[4.0, 9.0]).unwrap();
        assert_eq!(x, vec![1.0, 1.0]);
    }

    #[test]
    fn identity_cholesky() {
        let a = SymmetricMatrix::new(DMatrix::identity(5, 5)).unwrap();
        let c = cholesky(&a).unwrap();
        assert_eq!(c.log_det(), 0.0);
        let b = [1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(c.solve(&b).unwrap(), b.to_vec());
    }

    #[test]
    fn indefinite_reports_pivot() {
        let a = SymmetricMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        match cholesky(&a) {
            Err(Error::NotPositiveDefinite { index, pivot, .. }) => {
                assert_eq!(index, 1);
                assert!(pivot < 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(SymmetricMatrix::new(a).is_err());
    }

    #[test]
    fn toeplitz_unit_vector_gives_first_column() {
        let col = vec![1.0, 0.5, 0.25, 0.125, 0.0625];
        let op = GridKernelOperator::new(vec![(1.0, vec![col.clone()])]).unwrap();
        let mut e = vec![0.0; 5];
        e[0] = 1.0;
        let y = grid_mvm(&op, &e).unwrap();
        for (a, b) in y.iter().zip(&col) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(grid_mvm(&op, &[1.0]), Err(Error::Shape(_))));
    }
}
