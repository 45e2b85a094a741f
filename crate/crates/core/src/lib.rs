//! State-vector engine for adaptive Trotterization.
//!
//! The crate evolves spin-chain and quantum-link-model states with a
//! second-order Trotter product formula whose step size is chosen on the fly:
//! each step is made as large as possible while the energy density, the
//! energy-variance density and (optionally) local gauge-generator moments stay
//! within fixed tolerances of their initial values.
//!
//! Layout:
//!
//! * [`hilbert`]: basis encoding and [`StateVector`].
//! * [`operators`]: sparse Hermitian operators and model builders.
//! * [`propagate`]: Trotter steps, Krylov and dense exponentials.
//! * [`adaptive`]: constraint evaluation, step-size searches, run drivers.
//! * [`noise`]: stochastic trajectory ensembles with random couplings.
//! * [`spectral`]: exact diagonalization and long-time analysis.

pub mod adaptive;
pub mod hilbert;
pub mod noise;
pub mod operators;
pub mod propagate;
pub mod spectral;

mod error;

pub use error::{Error, Result};
pub use hilbert::{BasisLabel, Boundary, SpaceDescriptor, SpaceKind, StateVector};
pub use num_complex::Complex64;
pub use operators::{IsingParams, QlmParams, SparseOperator, Structure};
pub use propagate::{KrylovConfig, TrotterSplit};
