//! Dense decompositions backed by nalgebra.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 10_000;

fn to_nalgebra(a: &Array2<Complex64>) -> DMatrix<Complex64> {
    let (rows, cols) = a.dim();
    DMatrix::from_fn(rows, cols, |r, c| a[[r, c]])
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &Array2<Complex64>) -> Result<Vec<f64>> {
    let eig =
        nalgebra::SymmetricEigen::try_new(to_nalgebra(a), f64::EPSILON, MAX_SWEEPS).ok_or(Error::NonConvergence {
            routine: "Hermitian eigensolver",
        })?;
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    values.sort_by(|a, b| a.total_cmp(b));
    Ok(values)
}

/// Eigen-decomposition `(values, vectors)` of a Hermitian matrix; columns of
/// `vectors` are the eigenvectors.
pub fn hermitian_eigen(a: &Array2<Complex64>) -> Result<(Vec<f64>, Array2<Complex64>)> {
    let eig =
        nalgebra::SymmetricEigen::try_new(to_nalgebra(a), f64::EPSILON, MAX_SWEEPS).ok_or(Error::NonConvergence {
            routine: "Hermitian eigensolver",
        })?;
    let n = a.nrows();
    let vectors = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, c)]);
    Ok((eig.eigenvalues.iter().copied().collect(), vectors))
}

/// Singular values, descending.
pub fn singular_values(a: &Array2<Complex64>) -> Result<Vec<f64>> {
    let svd = nalgebra::SVD::try_new(to_nalgebra(a), false, false, f64::EPSILON, MAX_SWEEPS)
        .ok_or(Error::NonConvergence { routine: "SVD" })?;
    let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite singular value".into()));
    }
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}
