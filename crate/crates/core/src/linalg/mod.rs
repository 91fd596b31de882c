//! Complex dense and sparse linear algebra: LU factorizations with
//! condition estimates, the dense eigensolver, and Matrix Market I/O.

mod dense;
mod eig;
mod factor;
mod mm;
mod sparse;

pub use dense::DenseLu;
pub use eig::{EigDecomposition, eig_dense};
pub use factor::{FactorKind, FactorOptions, Factorization, factor, factor_dense, factor_sparse};
pub use mm::{mm_read, mm_read_str, mm_write, mm_write_string};
pub use sparse::{CscMatrix, SparseLu, minimum_degree_order};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, mismatch};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Default cap on the order of matrices handed to the dense eigensolver.
pub const DEFAULT_DENSE_LIMIT: usize = 2000;

/// Dense size cap, overridable through `GSMA_DENSE_LIMIT`.
pub fn dense_limit() -> usize {
    std::env::var("GSMA_DENSE_LIMIT").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_DENSE_LIMIT)
}

/// A matrix in either storage.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Dense(CMat),
    Sparse(CscMatrix),
}

impl Matrix {
    pub fn nrows(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.nrows(),
            Matrix::Sparse(s) => s.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.ncols(),
            Matrix::Sparse(s) => s.ncols(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Matrix::Sparse(_))
    }

    pub fn to_dense(&self) -> CMat {
        match self {
            Matrix::Dense(m) => m.clone(),
            Matrix::Sparse(s) => s.to_dense(),
        }
    }

    pub fn to_sparse(&self) -> CscMatrix {
        match self {
            Matrix::Dense(m) => CscMatrix::from_dense(m),
            Matrix::Sparse(s) => s.clone(),
        }
    }

    /// `self · x` for a block of columns.
    pub fn mul(&self, x: &CMat) -> CMat {
        match self {
            Matrix::Dense(m) => m * x,
            Matrix::Sparse(s) => s.mul_dense(x),
        }
    }

    pub fn mul_vec(&self, x: &CVec) -> CVec {
        match self {
            Matrix::Dense(m) => m * x,
            Matrix::Sparse(s) => s.mul_vec(x),
        }
    }

    /// `selfᴴ · x` without forming the adjoint.
    pub fn adjoint_mul(&self, x: &CMat) -> CMat {
        match self {
            Matrix::Dense(m) => m.ad_mul(x),
            Matrix::Sparse(s) => s.adjoint_mul_dense(x),
        }
    }

    pub fn adjoint(&self) -> Matrix {
        match self {
            Matrix::Dense(m) => Matrix::Dense(m.adjoint()),
            Matrix::Sparse(s) => Matrix::Sparse(s.adjoint()),
        }
    }

    pub fn transpose(&self) -> Matrix {
        match self {
            Matrix::Dense(m) => Matrix::Dense(m.transpose()),
            Matrix::Sparse(s) => Matrix::Sparse(s.transpose()),
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        match self {
            Matrix::Dense(m) => norm_inf(m),
            Matrix::Sparse(s) => s.norm_inf(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Matrix::Dense(m) => m.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
            Matrix::Sparse(s) => s.values().iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        }
    }

    /// `a·self + b·other`, sparse when both operands are sparse.
    pub fn combine(&self, a: C64, other: &Matrix, b: C64) -> Result<Matrix> {
        if self.nrows() != other.nrows() || self.ncols() != other.ncols() {
            return Err(mismatch("combine: operand shapes differ"));
        }
        Ok(match (self, other) {
            (Matrix::Sparse(x), Matrix::Sparse(y)) => Matrix::Sparse(x.linear_combination(a, y, b)),
            _ => Matrix::Dense(self.to_dense() * a + other.to_dense() * b),
        })
    }

    /// Number of stored entries (all entries for dense storage).
    pub fn nnz(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.len(),
            Matrix::Sparse(s) => s.nnz(),
        }
    }
}

impl From<CMat> for Matrix {
    fn from(m: CMat) -> Self {
        Matrix::Dense(m)
    }
}

impl From<CscMatrix> for Matrix {
    fn from(s: CscMatrix) -> Self {
        Matrix::Sparse(s)
    }
}

/// Maximum absolute row sum.
pub fn norm_inf(m: &CMat) -> f64 {
    (0..m.nrows()).map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Maximum absolute column sum.
pub fn norm_one(m: &CMat) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn cvec_from_real(v: &[f64]) -> CVec {
    CVec::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0)))
}

/// `a⁻¹ b` through a dense LU of `a`.
pub fn solve_dense(a: &CMat, b: &CMat) -> Result<CMat> {
    let lu = DenseLu::new(a.clone(), None)?;
    lu.solve(b)
}

/// Householder-free thin QR by modified Gram–Schmidt with one
/// reorthogonalization pass. Columns whose residual norm drops below
/// `drop · original norm` are discarded; returns the orthonormal basis.
pub fn orthonormal_basis(cols: &CMat, drop: f64, max_cols: usize) -> CMat {
    let m = cols.nrows();
    let mut basis: Vec<CVec> = Vec::new();
    for j in 0..cols.ncols() {
        if basis.len() == max_cols {
            break;
        }
        let original = cols.column(j).into_owned();
        let n0 = original.norm();
        if n0 == 0.0 {
            continue;
        }
        let mut v = original;
        for _ in 0..2 {
            for q in &basis {
                let c = q.dotc(&v);
                v -= q * c;
            }
        }
        let nv = v.norm();
        if nv > drop * n0 {
            basis.push(v / C64::new(nv, 0.0));
        }
    }
    let mut out = CMat::zeros(m, basis.len());
    for (j, q) in basis.iter().enumerate() {
        out.set_column(j, q);
    }
    out
}

/// Least-squares solution of `a x = b` for a tall full-rank `a`.
pub fn least_squares(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() != b.nrows() {
        return Err(mismatch("least_squares: row counts differ"));
    }
    let q = orthonormal_basis(a, 1e-13, a.ncols());
    if q.ncols() < a.ncols() {
        return Err(crate::error::Error::IterateSingular { condition: f64::INFINITY });
    }
    // a = q r with r = qᴴ a upper triangular.
    let r = q.ad_mul(a);
    let rhs = q.ad_mul(b);
    solve_dense(&r, &rhs)
}

/// Smallest singular value relative to the largest, via the eigenvalues
/// of the Gram matrix; adequate for the small matrices it is used on.
pub fn condition_2(a: &CMat) -> f64 {
    if a.ncols() == 0 {
        return 1.0;
    }
    let g = a.ad_mul(a);
    let eig = nalgebra::SymmetricEigen::new(g);
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return f64::INFINITY;
    }
    (max / min).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_basis_drops_dependent_columns() {
        let a = real_to_complex(&DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]));
        let q = orthonormal_basis(&a, 1e-12, 3);
        assert_eq!(q.ncols(), 2);
        let g = q.ad_mul(&q);
        assert!((g - CMat::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn least_squares_recovers_exact_solution() {
        let a = real_to_complex(&DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0]));
        let x = real_to_complex(&DMatrix::from_row_slice(2, 1, &[3.0, -1.0]));
        let b = &a * &x;
        let got = least_squares(&a, &b).unwrap();
        assert!((got - x).norm() < 1e-13);
    }

    #[test]
    fn condition_of_identity_is_one() {
        assert!((condition_2(&CMat::identity(4, 4)) - 1.0).abs() < 1e-12);
    }
}
