//! The SKI approximation `k̃(x, x') = w(x)ᵀ K_U w(x')`.
//!
//! `K_U` is never formed densely on the fast path. Dense SKI matrices are
//! assembled pair by pair: because the RBF kernel is a sum of separable
//! terms and `w(x)` is a tensor product, each entry contracts to a product
//! of `4×4` one-dimensional sums.

use nalgebra::DMatrix;

use crate::interp::{GridSpec, SparseWeights, Stencil1D};
use crate::kernels::{self, Dataset, Hyperparams, KernelKind, Param, Points};
use crate::linalg::{self, GridKernelOperator, KroneckerTerm, SymmetricMatrix};
use crate::{Error, Result};

/// Largest training set for which dense SKI matrices are assembled.
pub const DENSE_LIMIT: usize = 4096;

/// Lattice operator for the kernel or one of its partials.
pub fn lattice_operator(grid: &GridSpec, hp: &Hyperparams, kind: KernelKind) -> Result<GridKernelOperator> {
    let h = grid.h();
    let terms = kernels::separable_terms(hp, kind, grid.d())
        .into_iter()
        .map(|t| {
            let cols = t
                .factors
                .iter()
                .zip(grid.counts())
                .map(|(f, n)| (0..n).map(|k| f.eval(k as f64 * h, hp.lengthscale)).collect())
                .collect();
            (t.scale, cols)
        })
        .collect();
    GridKernelOperator::new(terms)
}

/// Trained SKI model: lattice, hyperparameters, `W` on the training inputs
/// and the structured `K_U`.
#[derive(Debug, Clone)]
pub struct SkiModel {
    grid: GridSpec,
    hp: Hyperparams,
    w_train: SparseWeights,
    k_u: GridKernelOperator,
}

impl SkiModel {
    pub fn build(data: &Dataset, grid: &GridSpec, hp: &Hyperparams) -> Result<Self> {
        if data.d() != grid.d() {
            return Err(Error::Shape(format!("data in {} dimensions, grid in {}", data.d(), grid.d())));
        }
        let w_train = SparseWeights::build(data.x().coords(), grid)?;
        let k_u = lattice_operator(grid, hp, KernelKind::Value)?;
        Ok(Self { grid: grid.clone(), hp: *hp, w_train, k_u })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn weights(&self) -> &SparseWeights {
        &self.w_train
    }

    pub fn operator(&self) -> &GridKernelOperator {
        &self.k_u
    }

    pub fn n(&self) -> usize {
        self.w_train.rows()
    }

    /// `K_U` evaluated densely from lattice coordinates.
    pub fn dense_k_u(&self) -> Result<SymmetricMatrix> {
        let m = self.grid.m_total();
        let nodes: Vec<f64> = (0..m).flat_map(|f| self.grid.node(f)).collect();
        let nodes = Points::new(self.grid.d(), nodes)?;
        SymmetricMatrix::new(kernels::gram(&nodes, &nodes, &self.hp)?)
    }

    fn weights_for(&self, pts: &Points) -> Result<SparseWeights> {
        if pts.d() != self.grid.d() {
            return Err(Error::Shape(format!("points in {} dimensions, grid in {}", pts.d(), self.grid.d())));
        }
        SparseWeights::build(pts.coords(), &self.grid)
    }
}

/// `Σ_terms scale Π_j s_a^jᵀ T_j s_b^j`
fn contract(terms: &[KroneckerTerm], sa: &[Stencil1D], sb: &[Stencil1D]) -> f64 {
    terms
        .iter()
        .map(|t| {
            let mut prod = t.scale;
            for ((col, a), b) in t.columns().iter().zip(sa).zip(sb) {
                let mut s = 0.0;
                for (ia, wa) in a.entries() {
                    if wa == 0.0 {
                        continue;
                    }
                    for (ib, wb) in b.entries() {
                        s += wa * wb * col[ia.abs_diff(ib)];
                    }
                }
                prod *= s;
            }
            prod
        })
        .sum()
}

fn assemble(op: &GridKernelOperator, a: &SparseWeights, b: &SparseWeights, symmetric: bool) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let start = if symmetric { i } else { 0 };
        for j in start..b.rows() {
            let v = contract(op.terms(), a.stencils(i), b.stencils(j));
            k[(i, j)] = v;
            if symmetric {
                k[(j, i)] = v;
            }
        }
    }
    k
}

fn check_dense(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "dense SKI matrices are limited to {DENSE_LIMIT} points, got {n}"
        )));
    }
    Ok(())
}

/// `w(x)ᵀ K_U w(x')`
pub fn ski_kernel(model: &SkiModel, x: &[f64], y: &[f64]) -> Result<f64> {
    let sa = model.grid.stencils(x)?;
    let sb = model.grid.stencils(y)?;
    Ok(contract(model.k_u.terms(), &sa, &sb))
}

/// `K̃ = W K_U Wᵀ` on the training inputs.
pub fn ski_gram(model: &SkiModel) -> Result<DMatrix<f64>> {
    check_dense(model.n())?;
    Ok(assemble(&model.k_u, &model.w_train, &model.w_train, true))
}

/// `K̃_{·,X} = W_test K_U W_trainᵀ`, one row per test point.
pub fn ski_cross(model: &SkiModel, test: &Points) -> Result<DMatrix<f64>> {
    check_dense(model.n().max(test.len()))?;
    let wt = model.weights_for(test)?;
    Ok(assemble(&model.k_u, &wt, &model.w_train, false))
}

/// `W_test K_U W_testᵀ`
pub fn ski_gram_test(model: &SkiModel, test: &Points) -> Result<DMatrix<f64>> {
    check_dense(test.len())?;
    let wt = model.weights_for(test)?;
    Ok(assemble(&model.k_u, &wt, &wt, true))
}

/// `W (∂K_U/∂θ) Wᵀ`, reusing the training weights.
pub fn ski_gram_partial(model: &SkiModel, which: Param) -> Result<DMatrix<f64>> {
    check_dense(model.n())?;
    let op = lattice_operator(&model.grid, &model.hp, KernelKind::Partial(which))?;
    Ok(assemble(&op, &model.w_train, &model.w_train, true))
}

/// `K̃ v` through scatter, FFT lattice product and gather.
pub fn ski_mvm(model: &SkiModel, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != model.n() {
        return Err(Error::Shape(format!("vector of length {} for {} training points", v.len(), model.n())));
    }
    let u = model.w_train.scatter(v)?;
    let ku = linalg::grid_mvm(&model.k_u, &u)?;
    model.w_train.gather(&ku)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(d: usize, m: usize, pts: Vec<f64>) -> SkiModel {
        let n = pts.len() / d;
        let data = Dataset::new(Points::new(d, pts).unwrap(), vec![0.0; n], 1.0).unwrap();
        let grid = GridSpec::new(d, m, 1.0).unwrap();
        SkiModel::build(&data, &grid, &Hyperparams::new(1.3, 0.6, 0.1).unwrap()).unwrap()
    }

    #[test]
    fn zero_vector_mvm() {
        let m = model(1, 8, vec![-0.3, 0.1, 0.77]);
        assert_eq!(ski_mvm(&m, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(ski_mvm(&m, &[0.0; 2]).is_err());
    }

    #[test]
    fn single_point_matches_weights() {
        let m = model(2, 4, vec![0.31, -0.42]);
        let k = ski_gram(&m).unwrap();
        let w = m.weights().to_dense();
        let ku = m.dense_k_u().unwrap();
        let direct = &w * ku.matrix() * w.transpose();
        assert_eq!(k.shape(), (1, 1));
        assert!((k[(0, 0)] - direct[(0, 0)]).abs() < 1e-13);
    }

    #[test]
    fn out_of_domain_row() {
        let grid = GridSpec::new(1, 8, 1.0).unwrap();
        let m = model(1, 8, vec![0.0]);
        let test = Points::new(1, vec![0.2, 1.1]).unwrap();
        assert!(matches!(ski_cross(&m, &test), Err(Error::OutOfDomain { row: Some(1), .. })));
        assert_eq!(grid.d(), 1);
    }
}
