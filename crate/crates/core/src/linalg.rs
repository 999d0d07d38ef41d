//! Small dense linear algebra shared by the learners.
//!
//! Dimensions here are tiny (d is typically 5), so everything is a dense
//! `nalgebra` matrix. Solves go through a Cholesky factorization; the
//! explicit inverse is never formed.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use thiserror::Error;

/// Symmetry tolerance accepted by [`SpdMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Relative singular-value cutoff used to decide the rank of an arm set.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is singular or not positive definite")]
    SingularMatrix,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A dense symmetric positive-definite matrix together with its Cholesky
/// factor.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl SpdMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, LinalgError> {
        let (rows, cols) = matrix.shape();
        if rows != cols {
            return Err(LinalgError::NotSquare { rows, cols });
        }
        let asym = (&matrix - matrix.transpose()).amax();
        let scale = matrix.amax().max(1.0);
        if asym > SYMMETRY_TOL * scale {
            return Err(LinalgError::NotSymmetric(asym));
        }
        let chol = Cholesky::new(matrix.clone()).ok_or(LinalgError::SingularMatrix)?;
        Ok(Self { matrix, chol })
    }

    pub fn identity(d: usize) -> Self {
        Self::new(DMatrix::identity(d, d)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Solves `A y = x`.
    pub fn solve(&self, x: &DVector<f64>) -> Result<DVector<f64>, LinalgError> {
        self.check_dim(x.len())?;
        Ok(self.chol.solve(x))
    }

    /// `x' A⁻¹ x`.
    pub fn inv_quad_form(&self, x: &DVector<f64>) -> Result<f64, LinalgError> {
        self.check_dim(x.len())?;
        let y = self.chol.l().solve_lower_triangular(x).ok_or(LinalgError::SingularMatrix)?;
        Ok(y.norm_squared())
    }

    fn check_dim(&self, got: usize) -> Result<(), LinalgError> {
        if got != self.dim() {
            return Err(LinalgError::DimensionMismatch { expected: self.dim(), got });
        }
        Ok(())
    }

    /// Smallest and largest eigenvalues.
    pub fn eigen_range(&self) -> (f64, f64) {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }

    /// Symmetric square root `A^{1/2}` and its inverse `A^{-1/2}`.
    pub fn sqrt_pair(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let q = &eig.eigenvectors;
        let sqrt = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()));
        let inv_sqrt = sqrt.map(|s| if s > 0.0 { 1.0 / s } else { 0.0 });
        let half = q * DMatrix::from_diagonal(&sqrt) * q.transpose();
        let inv_half = q * DMatrix::from_diagonal(&inv_sqrt) * q.transpose();
        (symmetrize(half), symmetrize(inv_half))
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `‖x‖_{A⁻¹} = √(x' A⁻¹ x)`.
pub fn inv_weighted_norm(a: &SpdMatrix, x: &DVector<f64>) -> Result<f64, LinalgError> {
    Ok(a.inv_quad_form(x)?.max(0.0).sqrt())
}

/// `Σ wᵢ vᵢ vᵢ'`.
pub fn weighted_outer_sum<'a, I>(d: usize, items: I) -> DMatrix<f64>
where
    I: IntoIterator<Item = (f64, &'a DVector<f64>)>,
{
    let mut acc = DMatrix::zeros(d, d);
    for (w, v) in items {
        acc.ger(w, v, v, 1.0);
    }
    acc
}

/// Orthonormal basis (as columns) of the span of `vectors`, with rank decided
/// by singular values above [`RANK_TOL`] times the largest one.
///
/// Returns an empty `d x 0` matrix when every vector is zero.
pub fn span_basis(d: usize, vectors: &[&DVector<f64>]) -> DMatrix<f64> {
    if vectors.is_empty() {
        return DMatrix::zeros(d, 0);
    }
    let mut stacked = DMatrix::zeros(d, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        stacked.set_column(j, v);
    }
    let svd = stacked.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let max_sv = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    if max_sv <= 0.0 {
        return DMatrix::zeros(d, 0);
    }
    let cutoff = RANK_TOL * max_sv;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let keep: Vec<usize> = order.into_iter().filter(|&i| svd.singular_values[i] > cutoff).collect();
    let mut basis = DMatrix::zeros(d, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        basis.set_column(j, &u.column(i));
    }
    basis
}

/// Numerical rank of a set of vectors.
pub fn rank(d: usize, vectors: &[&DVector<f64>]) -> usize {
    span_basis(d, vectors).ncols()
}
