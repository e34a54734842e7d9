//! Dense numeric kernels used by the optimizer.
//!
//! Matrices are `nalgebra::DMatrix<f64>`, which stores entries column-major.
//! Every kernel here is a pure function of its inputs except [`AdamState`],
//! which owns its moment buffers.

mod adam;
mod simplex;
mod sylvester;

pub use adam::AdamState;
pub use simplex::{
    ksparse_simplex_min, project_simplex, simplex_kkt_residual, simplex_qp, KSparseSolution,
};
pub use sylvester::solve_scaled_sylvester;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("diagonal scaling entry {index} is not positive ({value})")]
    NonPositiveScaling { index: usize, value: f64 },
    #[error("right factor is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("singular Sylvester pencil: lambda*D_i + eig_j = {0:e}")]
    SingularPencil(f64),
    #[error("threshold must be nonnegative, got {0}")]
    NegativeThreshold(f64),
    #[error("neighbor count k = {k} needs at least k + 1 admissible candidates, got {available}")]
    NeighborCount { k: usize, available: usize },
    #[error("degenerate neighborhood: the k smallest costs all equal the (k+1)-th")]
    DegenerateNeighborhood,
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("matrix has negative entries (min {0:e})")]
    NegativeEntries(f64),
}

/// Builds a matrix from column-major data, rejecting NaN and infinities.
pub fn dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix, NumError> {
    if data.len() != rows * cols {
        return Err(NumError::Dimension(format!(
            "{} entries for a {rows}x{cols} matrix",
            data.len()
        )));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(NumError::NonFinite("matrix data"));
    }
    Ok(Matrix::from_vec(rows, cols, data))
}

pub fn ensure_finite(m: &Matrix, what: &'static str) -> Result<(), NumError> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NumError::NonFinite(what))
    }
}

/// Elementwise shrinkage `sign(a) * max(|a| - tau, 0)`.
pub fn soft_threshold(a: &Matrix, tau: f64) -> Result<Matrix, NumError> {
    if !(tau >= 0.0) {
        return Err(NumError::NegativeThreshold(tau));
    }
    Ok(a.map(|x| shrink(x, tau)))
}

#[inline]
pub(crate) fn shrink(x: f64, tau: f64) -> f64 {
    let m = x.abs() - tau;
    if m > 0.0 {
        m.copysign(x)
    } else {
        0.0
    }
}

/// Graph Laplacian `diag(colsums(A)) - A`.
///
/// With `symmetrize` the Laplacian of `(A + A^T) / 2` is returned instead,
/// which is symmetric PSD whenever `A >= 0`.
pub fn laplacian(a: &Matrix, symmetrize: bool) -> Result<Matrix, NumError> {
    if !a.is_square() {
        return Err(NumError::Dimension(format!(
            "laplacian of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let min = a.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        return Err(NumError::NegativeEntries(min));
    }
    let base = if symmetrize {
        (a + a.transpose()) * 0.5
    } else {
        a.clone()
    };
    let mut l = -base.clone();
    for j in 0..base.ncols() {
        l[(j, j)] += base.column(j).sum();
    }
    Ok(l)
}

/// Sum of row l2 norms.
pub fn l21_norm(m: &Matrix) -> f64 {
    m.row_iter().map(|r| r.norm()).sum()
}

pub fn l1_norm(m: &Matrix) -> f64 {
    m.iter().map(|x| x.abs()).sum()
}

/// `(|A| + A) / 2`
pub fn positive_part(m: &Matrix) -> Matrix {
    m.map(|x| x.max(0.0))
}

/// `(|A| - A) / 2`
pub fn negative_part(m: &Matrix) -> Matrix {
    m.map(|x| (-x).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_cases() {
        let a = Matrix::from_row_slice(1, 3, &[1.5, -0.3, -2.0]);
        let out = soft_threshold(&a, 1.0).unwrap();
        assert_eq!(out[(0, 0)], 0.5);
        assert_eq!(out[(0, 1)], 0.0);
        assert_eq!(out[(0, 2)], -1.0);
        assert_eq!(soft_threshold(&a, 0.0).unwrap(), a);
        let b = Matrix::from_row_slice(1, 1, &[-0.3]);
        assert_eq!(soft_threshold(&b, 0.5).unwrap()[(0, 0)], 0.0);
        assert!(matches!(
            soft_threshold(&a, -1.0),
            Err(NumError::NegativeThreshold(_))
        ));
    }

    #[test]
    fn laplacian_cases() {
        let z = Matrix::zeros(3, 3);
        assert_eq!(laplacian(&z, true).unwrap(), z);
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let l = laplacian(&a, false).unwrap();
        assert_eq!(l, Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let neg = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(matches!(
            laplacian(&neg, true),
            Err(NumError::NegativeEntries(_))
        ));
    }

    #[test]
    fn laplacian_uses_column_sums_unsymmetrized() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 2.0, 1.0, 0.0]);
        let l = laplacian(&a, false).unwrap();
        // column 0 sums to 1, column 1 sums to 2
        assert_eq!(l[(0, 0)], 1.0);
        assert_eq!(l[(1, 1)], 2.0);
        assert_eq!(l[(0, 1)], -2.0);
    }

    #[test]
    fn dense_rejects_nan() {
        assert!(dense(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(dense(1, 2, vec![1.0]).is_err());
        assert!(dense(1, 2, vec![1.0, 2.0]).is_ok());
    }

    fn mat(n: usize, m: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(-3.0f64..3.0, n * m).prop_map(move |v| Matrix::from_vec(n, m, v))
    }

    proptest! {
        #[test]
        fn soft_threshold_is_nonexpansive(a in mat(3, 4), b in mat(3, 4), tau in 0.0f64..2.0) {
            let da = soft_threshold(&a, tau).unwrap() - soft_threshold(&b, tau).unwrap();
            prop_assert!(da.norm() <= (&a - &b).norm() + 1e-12);
        }

        #[test]
        fn soft_threshold_shrinks_and_keeps_sign(a in mat(2, 5), tau in 0.0f64..2.0) {
            let out = soft_threshold(&a, tau).unwrap();
            for (x, y) in a.iter().zip(out.iter()) {
                prop_assert!(y.abs() <= x.abs());
                prop_assert!(*y == 0.0 || y.signum() == x.signum());
            }
        }

        #[test]
        fn symmetrized_laplacian_is_psd(
            vals in prop::collection::vec(0.0f64..1.0, 36),
            xs in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 100),
        ) {
            let a = Matrix::from_vec(6, 6, vals);
            let l = laplacian(&a, true).unwrap();
            for x in xs {
                let x = Vector::from_vec(x);
                let q = (x.transpose() * &l * &x)[(0, 0)];
                prop_assert!(q >= -1e-10);
            }
        }
    }
}
