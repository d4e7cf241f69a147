//! Two kicked tops coupled through `(eps / j) J_z1 J_z2` kicks.
//!
//! The joint state `sum_{ab} M_{ab} |m_a> (x) |m_b>` is stored as its
//! amplitude matrix `M`. One period `U_eps (U_1 (x) U_2)` then acts as
//! `M -> P o (U_1 M U_2^T)` with the entrywise phase
//! `P_{ab} = exp(-i eps m_a m_b / j)`, so the `dim^2 x dim^2` propagator is
//! never formed.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::quantum_top::{build_floquet, TopParams};
use crate::spin::{coherent_state, CoherentParams, OperatorMatrix, SpinBasis, SpinState};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Eigenvalues below this carry no entropy.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledParams {
    basis: SpinBasis,
    k1: f64,
    k2: f64,
    eps: f64,
}

impl CoupledParams {
    pub fn new(basis: SpinBasis, k1: f64, k2: f64, eps: f64) -> Result<Self> {
        TopParams::new(basis, k1)?;
        TopParams::new(basis, k2)?;
        if !eps.is_finite() || eps < 0.0 {
            return Err(invalid("eps", format!("coupling {eps} must be finite and >= 0")));
        }
        Ok(Self { basis, k1, k2, eps })
    }

    pub fn basis(&self) -> SpinBasis {
        self.basis
    }

    pub fn j(&self) -> f64 {
        self.basis.j()
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn top1(&self) -> TopParams {
        TopParams::new(self.basis, self.k1).expect("validated")
    }

    pub fn top2(&self) -> TopParams {
        TopParams::new(self.basis, self.k2).expect("validated")
    }
}

/// Pure state of both tops as a `dim x dim` amplitude matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    basis: SpinBasis,
    amplitudes: Array2<Complex64>,
}

impl CoupledState {
    pub fn product(first: &SpinState, second: &SpinState) -> Result<Self> {
        first.basis().check_dim(second.dim())?;
        let a = first.amplitudes();
        let b = second.amplitudes();
        let n = a.len();
        Ok(Self {
            basis: first.basis(),
            amplitudes: Array2::from_shape_fn((n, n), |(r, c)| a[r] * b[c]),
        })
    }

    pub fn coherent_product(basis: SpinBasis, first: CoherentParams, second: CoherentParams) -> Self {
        Self::product(&coherent_state(basis, first), &coherent_state(basis, second)).expect("same basis")
    }

    /// Takes an amplitude matrix already normalized to within `1e-12`.
    pub fn from_amplitudes(basis: SpinBasis, amplitudes: Array2<Complex64>) -> Result<Self> {
        basis.check_dim(amplitudes.nrows())?;
        basis.check_dim(amplitudes.ncols())?;
        let state = Self { basis, amplitudes };
        let drift = (state.norm() - 1.0).abs();
        if drift > 1e-12 {
            return Err(Error::Numerical(format!("state norm off by {drift:e}")));
        }
        Ok(state)
    }

    pub fn basis(&self) -> SpinBasis {
        self.basis
    }

    pub fn amplitudes(&self) -> &Array2<Complex64> {
        &self.amplitudes
    }

    /// Frobenius norm of the amplitude matrix.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Amplitudes flattened as `vec` over `|m_1> (x) |m_2>`, first index slowest.
    pub fn to_vector(&self) -> Array1<Complex64> {
        self.amplitudes.iter().copied().collect()
    }

    /// Schmidt coefficients squared (eigenvalues of either reduced density),
    /// descending.
    pub fn schmidt_probabilities(&self) -> Result<Vec<f64>> {
        Ok(linalg::singular_values(&self.amplitudes)?
            .into_iter()
            .map(|s| s * s)
            .collect())
    }

    /// `S_lin` of the first top, from the purity `||M M^dagger||_F^2`.
    pub fn linear_entropy(&self) -> f64 {
        linear_entropy(&reduced_density(self))
    }

    /// `S_vN` of the first top, from the singular values of `M`.
    pub fn von_neumann_entropy(&self) -> Result<f64> {
        Ok(entropy_of_spectrum(&self.schmidt_probabilities()?))
    }
}

fn entrywise_phases(basis: SpinBasis, eps: f64) -> Array2<Complex64> {
    let n = basis.dim();
    let j = basis.j();
    Array2::from_shape_fn((n, n), |(a, b)| {
        Complex64::from_polar(1.0, -eps * basis.m(a) * basis.m(b) / j)
    })
}

/// Cached one-period propagator of the coupled tops.
#[derive(Debug, Clone)]
pub struct CoupledEvolution {
    basis: SpinBasis,
    u1: Array2<Complex64>,
    u2_transposed: Array2<Complex64>,
    phases: Array2<Complex64>,
    scratch: Array2<Complex64>,
}

impl CoupledEvolution {
    pub fn new(params: &CoupledParams) -> Self {
        let u1 = build_floquet(&params.top1());
        let u2 = build_floquet(&params.top2());
        Self::from_operators(&u1, &u2, params.eps()).expect("operators share the basis")
    }

    pub fn from_operators(u1: &OperatorMatrix, u2: &OperatorMatrix, eps: f64) -> Result<Self> {
        let basis = u1.basis();
        basis.check_dim(u2.dim())?;
        let n = basis.dim();
        Ok(Self {
            basis,
            u1: u1.entries().clone(),
            u2_transposed: u2.entries().t().to_owned(),
            phases: entrywise_phases(basis, eps),
            scratch: Array2::from_elem((n, n), ZERO),
        })
    }

    /// Advances `state` by one kick in place.
    pub fn step(&mut self, state: &mut CoupledState) -> Result<()> {
        self.basis.check_dim(state.amplitudes.nrows())?;
        general_mat_mul(ONE, &self.u1, &state.amplitudes, ZERO, &mut self.scratch);
        general_mat_mul(ONE, &self.scratch, &self.u2_transposed, ZERO, &mut state.amplitudes);
        Zip::from(&mut state.amplitudes)
            .and(&self.phases)
            .for_each(|m, p| *m *= p);
        Ok(())
    }
}

/// `U_eps (U_1 (x) U_2) Psi` for a single kick.
pub fn coupled_step(state: &CoupledState, u1: &OperatorMatrix, u2: &OperatorMatrix, eps: f64) -> Result<CoupledState> {
    u1.basis().check_dim(state.amplitudes.nrows())?;
    let mut evolution = CoupledEvolution::from_operators(u1, u2, eps)?;
    let mut next = state.clone();
    evolution.step(&mut next)?;
    Ok(next)
}

/// Reduced density matrix of one top.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity {
    entries: Array2<Complex64>,
}

impl ReducedDensity {
    /// Checks Hermiticity (`1e-12`) and unit trace (`1e-10`).
    pub fn new(entries: Array2<Complex64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: entries.ncols(),
            });
        }
        let rho = Self { entries };
        let trace = rho.trace();
        if (trace - 1.0).abs() > 1e-10 {
            return Err(Error::Numerical(format!("trace {trace} != 1")));
        }
        for r in 0..n {
            for c in r..n {
                if (rho.entries[[r, c]] - rho.entries[[c, r]].conj()).norm() > 1e-12 {
                    return Err(Error::Numerical("density matrix not Hermitian".into()));
                }
            }
        }
        Ok(rho)
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diag().iter().map(|z| z.re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues, ascending, without clamping.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::hermitian_eigenvalues(&self.entries)
    }
}

/// `rho_1 = M M^dagger`.
pub fn reduced_density(state: &CoupledState) -> ReducedDensity {
    let m = &state.amplitudes;
    ReducedDensity {
        entries: m.dot(&m.t().mapv(|z| z.conj())),
    }
}

/// `rho_2 = M^T conj(M)`.
pub fn reduced_density_second(state: &CoupledState) -> ReducedDensity {
    let m = &state.amplitudes;
    ReducedDensity {
        entries: m.t().dot(&m.mapv(|z| z.conj())),
    }
}

/// `1 - Tr(rho^2)`.
pub fn linear_entropy(rho: &ReducedDensity) -> f64 {
    let n = rho.entries.nrows() as f64;
    (1.0 - rho.purity()).clamp(0.0, 1.0 - 1.0 / n)
}

/// `-sum p ln p` over a spectrum clamped to `[0, 1]`, dropping values under
/// [`EIGENVALUE_FLOOR`].
pub fn entropy_of_spectrum(spectrum: &[f64]) -> f64 {
    let s: f64 = spectrum
        .iter()
        .map(|&p| p.clamp(0.0, 1.0))
        .filter(|&p| p >= EIGENVALUE_FLOOR)
        .map(|p| -p * p.ln())
        .sum();
    // `+ 0.0` turns the -0.0 of a pure state into 0.0
    (s + 0.0).clamp(0.0, (spectrum.len() as f64).ln())
}

/// `-Tr(rho ln rho)` in nats.
pub fn von_neumann_entropy(rho: &ReducedDensity) -> Result<f64> {
    Ok(entropy_of_spectrum(&rho.eigenvalues()?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropySeries {
    pub times: Vec<usize>,
    pub s_lin: Vec<f64>,
    pub s_vn: Vec<f64>,
}

fn check_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(invalid("steps", "need at least one kick"));
    }
    Ok(())
}

/// Linear and von Neumann entropies at every kick `t = 0..=steps`.
pub fn entropy_series(
    params: &CoupledParams,
    init1: CoherentParams,
    init2: CoherentParams,
    steps: usize,
) -> Result<EntropySeries> {
    check_steps(steps)?;
    let mut evolution = CoupledEvolution::new(params);
    let mut state = CoupledState::coherent_product(params.basis(), init1, init2);
    let mut s_lin = Vec::with_capacity(steps + 1);
    let mut s_vn = Vec::with_capacity(steps + 1);
    for t in 0..=steps {
        if t > 0 {
            evolution.step(&mut state)?;
        }
        s_lin.push(state.linear_entropy());
        s_vn.push(state.von_neumann_entropy()?);
    }
    Ok(EntropySeries {
        times: (0..=steps).collect(),
        s_lin,
        s_vn,
    })
}

/// Linear entropy only, `t = 0..=steps`; skips the SVD.
pub fn linear_entropy_series(
    params: &CoupledParams,
    init1: CoherentParams,
    init2: CoherentParams,
    steps: usize,
) -> Result<Vec<f64>> {
    check_steps(steps)?;
    let mut evolution = CoupledEvolution::new(params);
    let mut state = CoupledState::coherent_product(params.basis(), init1, init2);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state.linear_entropy());
    for _ in 0..steps {
        evolution.step(&mut state)?;
        out.push(state.linear_entropy());
    }
    Ok(out)
}

/// `(S_lin, S_vN)` after exactly `steps` kicks.
pub fn final_entropies(
    params: &CoupledParams,
    init1: CoherentParams,
    init2: CoherentParams,
    steps: usize,
) -> Result<(f64, f64)> {
    let mut evolution = CoupledEvolution::new(params);
    let mut state = CoupledState::coherent_product(params.basis(), init1, init2);
    for _ in 0..steps {
        evolution.step(&mut state)?;
    }
    Ok((state.linear_entropy(), state.von_neumann_entropy()?))
}
