//! Single quantum kicked top.
//!
//! The Floquet operator is `U = exp(-i k J_z^2 / 2j) exp(-i pi J_y / 2)`:
//! rotate by pi/2 about y, then twist about z. In the `|jm>` basis the phase
//! multiplies the row, `U_{m'm} = exp(-i k m'^2 / 2j) d_{m'm}(pi/2)`; this is
//! the ordering whose classical limit is the map in [`crate::classical`].
//! The kick phase uses `1/(2j)`, consistent with the Hamiltonian
//! `k J_z^2 / 2j` and with the coupled-top factors.

use std::f64::consts::FRAC_PI_2;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spin::{coherent_state, wigner_d_real, CoherentParams, OperatorKind, OperatorMatrix, SpinBasis, SpinState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopParams {
    basis: SpinBasis,
    k: f64,
}

impl TopParams {
    pub fn new(basis: SpinBasis, k: f64) -> Result<Self> {
        if !k.is_finite() || k < 0.0 {
            return Err(invalid("k", format!("kick strength {k} must be finite and >= 0")));
        }
        Ok(Self { basis, k })
    }

    pub fn basis(&self) -> SpinBasis {
        self.basis
    }

    pub fn j(&self) -> f64 {
        self.basis.j()
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

/// `sigma^2(t)` of `z = J_z / j` at integer kick counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSeries {
    pub times: Vec<usize>,
    pub values: Vec<f64>,
}

impl VarianceSeries {
    /// Mean of the values with `lo <= t <= hi`.
    pub fn window_mean(&self, lo: usize, hi: usize) -> Option<f64> {
        let picked: Vec<f64> = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| (lo..=hi).contains(*t))
            .map(|(_, v)| *v)
            .collect();
        if picked.is_empty() {
            None
        } else {
            Some(picked.iter().sum::<f64>() / picked.len() as f64)
        }
    }
}

/// Floquet matrix for a signed kick strength; negative `k` is allowed here
/// so the conjugation symmetry can be exercised.
pub(crate) fn floquet_entries(basis: SpinBasis, k: f64) -> Array2<Complex64> {
    let d = wigner_d_real(basis, FRAC_PI_2).expect("finite angle");
    let two_j = 2.0 * basis.j();
    let phases: Vec<Complex64> = basis
        .m_values()
        .map(|m| Complex64::from_polar(1.0, -k * m * m / two_j))
        .collect();
    Array2::from_shape_fn(d.dim(), |(r, c)| phases[r] * d[[r, c]])
}

/// One-period evolution operator of a single top.
pub fn build_floquet(params: &TopParams) -> OperatorMatrix {
    OperatorMatrix::new_unchecked(
        params.basis(),
        floquet_entries(params.basis(), params.k()),
        OperatorKind::Unitary,
    )
}

/// Applies `U` to `state` `steps` times by repeated matrix-vector products.
pub fn evolve(state: &SpinState, floquet: &OperatorMatrix, steps: usize) -> Result<SpinState> {
    let mut current = state.clone();
    for _ in 0..steps {
        current = floquet.apply(&current)?;
    }
    Ok(current)
}

/// `(<z>, <z^2>)` with `z = J_z / j`.
pub fn z_moments(state: &SpinState) -> (f64, f64) {
    let basis = state.basis();
    let j = basis.j();
    let (mut first, mut second) = (0.0, 0.0);
    for (i, amp) in state.amplitudes().iter().enumerate() {
        let p = amp.norm_sqr();
        let z = basis.m(i) / j;
        first += p * z;
        second += p * z * z;
    }
    (first, second)
}

pub(crate) fn z_variance(state: &SpinState) -> f64 {
    let (mean, square) = z_moments(state);
    (square - mean * mean).max(0.0)
}

/// Quantum variance of `z` for `t = 0..=steps`, starting from a coherent state.
pub fn variance_series(params: &TopParams, initial: CoherentParams, steps: usize) -> Result<VarianceSeries> {
    if steps == 0 {
        return Err(invalid("steps", "need at least one kick"));
    }
    let floquet = build_floquet(params);
    let mut state = coherent_state(params.basis(), initial);
    let mut values = Vec::with_capacity(steps + 1);
    values.push(z_variance(&state));
    for _ in 0..steps {
        state = floquet.apply(&state)?;
        values.push(z_variance(&state));
    }
    Ok(VarianceSeries {
        times: (0..=steps).collect(),
        values,
    })
}
