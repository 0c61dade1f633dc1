//! Variational simulation of adiabatic state preparation on transverse-field
//! Ising chains.

pub mod circuit;
pub mod error;
pub mod estimator;
pub mod pauli;
pub mod hamiltonian;
pub mod statevector;
pub mod vqs;

pub use error::{Error, Result};
pub use pauli::{Pauli, PauliString, PauliSum};
pub use circuit::{reference_ansatz, AnsatzName, AnsatzSpec, ParamCircuit};
pub use estimator::{Convention, EstimatorConfig, EstimatorMode, GridDatabase};
pub use hamiltonian::{build_tfim, build_tfim_with, Boundary, Schedule, TwoSiteBonds};
pub use statevector::{expect_pauli, fidelity, inner, sample_bitstrings, Gate, Histogram, StateVec};
pub use vqs::{run, EvolutionProblem, Solver, StepRecord, Trajectory, TrajectorySummary};
