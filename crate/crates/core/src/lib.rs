//! Entanglement production between two coupled quantum kicked tops, computed
//! exactly and in second-order perturbation theory.
//!
//! * [`spin`]: angular-momentum matrices, Wigner d-matrices, spin coherent
//!   states and Husimi functions.
//! * [`quantum_top`] and [`classical`]: a single top, quantum and classical.
//! * [`coupled`]: exact evolution of two coupled tops and subsystem entropies.
//! * [`perturbation`]: interaction-picture correlation functions, the
//!   second-order linear entropy and the phenomenological rate laws.
//! * [`analysis`]: end-to-end rate measurements shared by the CLI and tests.

pub mod analysis;
pub mod classical;
pub mod coupled;
pub mod error;
pub mod linalg;
pub mod perturbation;
pub mod quantum_top;
pub mod spin;

pub use classical::{ClassicalEnsemble, ClassicalPoint, LyapunovAveraging, TangentVector};
pub use coupled::{CoupledParams, CoupledState, EntropySeries, ReducedDensity};
pub use error::{Error, Result};
pub use perturbation::{CorrelationLabel, CorrelationMatrix, FitWindow, PhenoParams};
pub use quantum_top::{TopParams, VarianceSeries};
pub use spin::{Axis, CoherentParams, OperatorKind, OperatorMatrix, SpinBasis, SpinState};
