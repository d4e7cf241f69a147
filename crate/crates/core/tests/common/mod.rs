#![allow(dead_code)]

use kicked_tops::linalg::hermitian_eigen;
use kicked_tops::spin::build_angular_momentum;
use kicked_tops::{Axis, SpinBasis};
use ndarray::Array2;
use num_complex::Complex64;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `exp(-i t H)` for Hermitian `H` by diagonalization.
pub fn expm_hermitian(h: &Array2<Complex64>, t: f64) -> Array2<Complex64> {
    let (values, vectors) = hermitian_eigen(h).unwrap();
    let mut scaled = vectors.clone();
    for (mut column, &v) in scaled.columns_mut().into_iter().zip(&values) {
        let phase = Complex64::from_polar(1.0, -t * v);
        column.mapv_inplace(|z| z * phase);
    }
    scaled.dot(&vectors.t().mapv(|z| z.conj()))
}

/// `exp(-i beta J_y)` without touching the d-matrix code.
pub fn rotation_oracle(basis: SpinBasis, beta: f64) -> Array2<Complex64> {
    expm_hermitian(build_angular_momentum(basis, Axis::Y).entries(), beta)
}

/// `exp(-i k J_z^2 / 2j) exp(-i pi J_y / 2)`.
pub fn floquet_oracle(basis: SpinBasis, k: f64) -> Array2<Complex64> {
    let jz = build_angular_momentum(basis, Axis::Z);
    let jz2 = jz.entries().dot(jz.entries());
    let kick = expm_hermitian(&jz2, k / (2.0 * basis.j()));
    kick.dot(&rotation_oracle(basis, std::f64::consts::FRAC_PI_2))
}

pub fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Kronecker product with the first factor's index varying slowest.
pub fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (n, m) = (a.nrows(), b.nrows());
    Array2::from_shape_fn((n * m, n * m), |(r, col)| a[[r / m, col / m]] * b[[r % m, col % m]])
}
