//! Angular-momentum algebra for a single spin `j`.
//!
//! Every vector and matrix in this crate is expressed in the `|j, m>` basis
//! with the magnetic quantum number running in descending order,
//! `m = j, j-1, ..., -j`. Basis index `i` therefore carries `m = j - i`; the
//! only place that mapping is spelled out is [`SpinBasis::m`].

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// The `2j + 1` dimensional carrier space of spin `j`.
///
/// Stored as `2j` so half-integer spins are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinBasis {
    two_j: u32,
}

impl SpinBasis {
    pub fn from_two_j(two_j: u32) -> Result<Self> {
        if two_j == 0 {
            return Err(invalid("j", "spin magnitude must be positive"));
        }
        Ok(Self { two_j })
    }

    /// Accepts integer or half-integer `j`.
    pub fn new(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !twice.is_finite() || twice < 1.0 || (twice - twice.round()).abs() > 1e-9 {
            return Err(invalid("j", format!("{j} is not a positive (half-)integer")));
        }
        Self::from_two_j(twice.round() as u32)
    }

    pub fn two_j(&self) -> u32 {
        self.two_j
    }

    pub fn j(&self) -> f64 {
        f64::from(self.two_j) / 2.0
    }

    pub fn dim(&self) -> usize {
        self.two_j as usize + 1
    }

    /// Magnetic quantum number carried by basis index `index`.
    #[inline]
    pub fn m(&self, index: usize) -> f64 {
        self.j() - index as f64
    }

    pub fn m_values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim()).map(|i| self.m(i))
    }

    pub(crate) fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Hermitian,
    Unitary,
    General,
}

/// Dense operator on a single spin.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    basis: SpinBasis,
    entries: Array2<Complex64>,
    kind: OperatorKind,
}

const HERMITIAN_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;

impl OperatorMatrix {
    /// Wraps `entries`, verifying the claimed `kind`.
    pub fn new(basis: SpinBasis, entries: Array2<Complex64>, kind: OperatorKind) -> Result<Self> {
        let (rows, cols) = entries.dim();
        basis.check_dim(rows)?;
        basis.check_dim(cols)?;
        let op = Self { basis, entries, kind };
        match kind {
            OperatorKind::Hermitian if op.hermiticity_defect() > HERMITIAN_TOL => Err(Error::Numerical(format!(
                "operator not Hermitian ({:e})",
                op.hermiticity_defect()
            ))),
            OperatorKind::Unitary if op.unitarity_defect() > UNITARY_TOL => Err(Error::Numerical(format!(
                "operator not unitary ({:e})",
                op.unitarity_defect()
            ))),
            _ => Ok(op),
        }
    }

    pub(crate) fn new_unchecked(basis: SpinBasis, entries: Array2<Complex64>, kind: OperatorKind) -> Self {
        Self { basis, entries, kind }
    }

    pub fn basis(&self) -> SpinBasis {
        self.basis
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<Complex64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `max |A - A^dagger|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let a = &self.entries;
        let n = a.nrows();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((a[[r, c]] - a[[c, r]].conj()).norm());
            }
        }
        worst
    }

    /// `max |A^dagger A - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let a = &self.entries;
        let prod = a.t().mapv(|z| z.conj()).dot(a);
        max_deviation_from_identity(&prod)
    }

    pub fn apply(&self, state: &SpinState) -> Result<SpinState> {
        self.basis.check_dim(state.dim())?;
        Ok(SpinState {
            basis: self.basis,
            amplitudes: self.entries.dot(&state.amplitudes),
        })
    }

    pub fn matmul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.basis.check_dim(other.dim())?;
        Ok(Self::new_unchecked(
            self.basis,
            self.entries.dot(&other.entries),
            OperatorKind::General,
        ))
    }
}

pub(crate) fn max_deviation_from_identity(m: &Array2<Complex64>) -> f64 {
    m.indexed_iter()
        .map(|((r, c), z)| {
            let target = if r == c { 1.0 } else { 0.0 };
            (z - target).norm()
        })
        .fold(0.0, f64::max)
}

/// Pure state of a single spin.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    basis: SpinBasis,
    amplitudes: Array1<Complex64>,
}

impl SpinState {
    /// Takes amplitudes that are already normalized to within `1e-12`.
    pub fn from_amplitudes(basis: SpinBasis, amplitudes: Array1<Complex64>) -> Result<Self> {
        basis.check_dim(amplitudes.len())?;
        let state = Self { basis, amplitudes };
        let drift = (state.norm() - 1.0).abs();
        if drift > 1e-12 {
            return Err(Error::Numerical(format!("state norm off by {drift:e}")));
        }
        Ok(state)
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(basis: SpinBasis, mut amplitudes: Array1<Complex64>) -> Result<Self> {
        basis.check_dim(amplitudes.len())?;
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(invalid("amplitudes", "cannot normalize a zero vector"));
        }
        amplitudes.mapv_inplace(|z| z / norm);
        Ok(Self { basis, amplitudes })
    }

    /// `|j, m>` basis state.
    pub fn basis_state(basis: SpinBasis, index: usize) -> Result<Self> {
        if index >= basis.dim() {
            return Err(invalid("index", format!("{index} >= dim {}", basis.dim())));
        }
        let mut amplitudes = Array1::from_elem(basis.dim(), ZERO);
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { basis, amplitudes })
    }

    pub(crate) fn from_raw(basis: SpinBasis, amplitudes: Array1<Complex64>) -> Self {
        Self { basis, amplitudes }
    }

    pub fn basis(&self) -> SpinBasis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &Array1<Complex64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Array1<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &SpinState) -> Result<Complex64> {
        self.basis.check_dim(other.dim())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn expectation(&self, op: &OperatorMatrix) -> Result<Complex64> {
        let image = op.apply(self)?;
        self.overlap(&image)
    }
}

/// Matrix of `J_x`, `J_y` or `J_z`.
pub fn build_angular_momentum(basis: SpinBasis, axis: Axis) -> OperatorMatrix {
    let n = basis.dim();
    let j = basis.j();
    let mut entries = Array2::from_elem((n, n), ZERO);
    match axis {
        Axis::Z => {
            for i in 0..n {
                entries[[i, i]] = Complex64::new(basis.m(i), 0.0);
            }
        }
        Axis::X | Axis::Y => {
            // J+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>, and m+1 sits at index i-1.
            for i in 1..n {
                let m = basis.m(i);
                let raise = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
                let (upper, lower) = match axis {
                    // <m+1|J_x|m> = <m|J_x|m+1> = raise / 2
                    Axis::X => (Complex64::new(0.5 * raise, 0.0), Complex64::new(0.5 * raise, 0.0)),
                    // J_y = (J+ - J-) / 2i
                    _ => (Complex64::new(0.0, -0.5 * raise), Complex64::new(0.0, 0.5 * raise)),
                };
                entries[[i - 1, i]] = upper;
                entries[[i, i - 1]] = lower;
            }
        }
    }
    OperatorMatrix::new_unchecked(basis, entries, OperatorKind::Hermitian)
}

/// `ln(n!)` for `n = 0..=max`.
pub(crate) fn ln_factorials(max: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(max + 1);
    let mut acc = 0.0f64;
    table.push(0.0);
    for n in 1..=max {
        acc += (n as f64).ln();
        table.push(acc);
    }
    table
}

fn ln_binomial(table: &[f64], n: usize, k: usize) -> f64 {
    table[n] - table[k] - table[n - k]
}

/// Jacobi polynomial `P_n^{(a,b)}(x)` by the standard three-term recurrence.
pub fn jacobi_polynomial(n: usize, a: f64, b: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = (a + 1.0) + 0.5 * (a + b + 2.0) * (x - 1.0);
    for deg in 2..=n {
        let d = deg as f64;
        let s = 2.0 * d + a + b;
        let c1 = 2.0 * d * (d + a + b) * (s - 2.0);
        let c2 = (s - 1.0) * (s * (s - 2.0) * x + a * a - b * b);
        let c3 = 2.0 * (d + a - 1.0) * (d + b - 1.0) * s;
        let next = (c2 * cur - c3 * prev) / c1;
        prev = cur;
        cur = next;
    }
    cur
}

/// Real matrix `d_{m'm}(beta) = <j m'| exp(-i beta J_y) |j m>`.
///
/// Evaluated through the Jacobi-polynomial representation, which stays
/// accurate at large `j`; factorial prefactors come from a log table.
pub fn wigner_d_real(basis: SpinBasis, beta: f64) -> Result<Array2<f64>> {
    if !beta.is_finite() {
        return Err(invalid("beta", "rotation angle must be finite"));
    }
    let two_j = basis.two_j() as usize;
    let n = basis.dim();
    let table = ln_factorials(2 * two_j + 1);
    let (s, c) = (0.5 * beta).sin_cos();
    let x = beta.cos();

    let mut d = Array2::zeros((n, n));
    for row in 0..n {
        for col in 0..n {
            // Row carries m', column carries m; counts are j+m, j-m, j+m', j-m'.
            let j_plus_m = two_j - col;
            let j_minus_m = col;
            let j_plus_mp = two_j - row;
            let j_minus_mp = row;
            let k = j_plus_m.min(j_minus_m).min(j_plus_mp).min(j_minus_mp);
            let (a, lambda) = if k == j_plus_m {
                (col - row, col - row)
            } else if k == j_minus_m || k == j_plus_mp {
                (row - col, 0)
            } else {
                (col - row, col - row)
            };
            let b = two_j - 2 * k - a;
            let ln_ratio = ln_binomial(&table, two_j - k, k + a) - ln_binomial(&table, k + b, b);
            let sign = if lambda % 2 == 0 { 1.0 } else { -1.0 };
            d[[row, col]] = sign
                * (0.5 * ln_ratio).exp()
                * s.powi(a as i32)
                * c.powi(b as i32)
                * jacobi_polynomial(k, a as f64, b as f64, x);
        }
    }
    Ok(d)
}

/// Wigner d-matrix as a unitary [`OperatorMatrix`].
pub fn wigner_d(basis: SpinBasis, beta: f64) -> Result<OperatorMatrix> {
    let d = wigner_d_real(basis, beta)?;
    Ok(OperatorMatrix::new_unchecked(
        basis,
        d.mapv(|v| Complex64::new(v, 0.0)),
        OperatorKind::Unitary,
    ))
}

/// Centre of a spin coherent state on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentParams {
    theta: f64,
    phi: f64,
}

impl CoherentParams {
    /// `theta` in `[0, pi]`, `phi` in `[-pi, pi)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(invalid("theta", format!("{theta} outside [0, pi]")));
        }
        if !(-PI..PI).contains(&phi) {
            return Err(invalid("phi", format!("{phi} outside [-pi, pi)")));
        }
        Ok(Self { theta, phi })
    }

    /// Like [`CoherentParams::new`] but folds any finite `phi` into `[-pi, pi)`.
    pub fn wrapped(theta: f64, phi: f64) -> Result<Self> {
        if !phi.is_finite() {
            return Err(invalid("phi", "must be finite"));
        }
        Self::new(theta, wrap_phase(phi))
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Stereographic label `e^{i phi} tan(theta/2)`; infinite at the south pole.
    pub fn stereographic(&self) -> Complex64 {
        Complex64::from_polar((0.5 * self.theta).tan(), self.phi)
    }

    /// `(cos(theta/2), sin(theta/2))`, each exact at its own pole.
    fn half_angle_cs(&self) -> (f64, f64) {
        let half = 0.5 * self.theta;
        if self.theta <= 0.5 * PI {
            (half.cos(), half.sin())
        } else {
            let rest = 0.5 * (PI - self.theta);
            (rest.sin(), rest.cos())
        }
    }
}

pub(crate) fn wrap_phase(phi: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = (phi + PI).rem_euclid(two_pi) - PI;
    if w >= PI {
        w -= two_pi;
    }
    w
}

/// Spin coherent state `|theta, phi>`.
///
/// Amplitudes are `sqrt(C(2j, j-m)) cos^{j+m}(theta/2) sin^{j-m}(theta/2) e^{i(j-m)phi}`,
/// which is the stereographic form with `(1 + |gamma|^2)^{-j}` folded in, so
/// both poles are exact.
pub fn coherent_state(basis: SpinBasis, params: CoherentParams) -> SpinState {
    let two_j = basis.two_j() as usize;
    let table = ln_factorials(two_j);
    let (c, s) = params.half_angle_cs();
    let amplitudes = Array1::from_shape_fn(basis.dim(), |i| {
        let magnitude = (0.5 * ln_binomial(&table, two_j, i)).exp() * c.powi((two_j - i) as i32) * s.powi(i as i32);
        Complex64::from_polar(magnitude, i as f64 * params.phi)
    });
    SpinState::from_raw(basis, amplitudes)
}

/// Uniform `(theta, phi)` grid of cell midpoints in theta and left edges in phi.
pub fn husimi_grid(n_theta: usize, n_phi: usize) -> Vec<CoherentParams> {
    let mut grid = Vec::with_capacity(n_theta * n_phi);
    for a in 0..n_theta {
        let theta = (a as f64 + 0.5) * PI / n_theta as f64;
        for b in 0..n_phi {
            let phi = -PI + 2.0 * PI * b as f64 / n_phi as f64;
            grid.push(CoherentParams { theta, phi });
        }
    }
    grid
}

/// Husimi function `Q = |<theta, phi|psi>|^2` at each grid point.
pub fn husimi(state: &SpinState, grid: &[CoherentParams]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(invalid("grid", "Husimi grid is empty"));
    }
    let basis = state.basis();
    Ok(grid
        .iter()
        .map(|&p| {
            let coherent = coherent_state(basis, p);
            let overlap: Complex64 = coherent
                .amplitudes()
                .iter()
                .zip(state.amplitudes().iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            overlap.norm_sqr().clamp(0.0, 1.0)
        })
        .collect())
}
