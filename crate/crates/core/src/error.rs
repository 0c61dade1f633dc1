use thiserror::Error;

/// Errors produced by the simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("gate acts on qubit {0} more than once")]
    DuplicateTarget(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("amplitude vector of length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("shot count must be at least 1")]
    ZeroShots,

    #[error("observable is not Hermitian: term {term} has complex weight {re}{im:+}i")]
    NonHermitian { term: String, re: f64, im: f64 },

    #[error("invalid Pauli string {0:?}")]
    InvalidPauli(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("chain length {0} is too short; at least 2 spins are required")]
    ChainTooShort(usize),

    #[error("time {t} lies outside the schedule window [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("dense diagonalization limited to {max} qubits, got {n}")]
    TooLarge { n: usize, max: usize },

    #[error("eigenpair residual {residual:e} exceeds tolerance")]
    EigenResidual { residual: f64 },

    #[error("integration failed at t = {t}: norm drift {drift:e}")]
    IntegrationFailure { t: f64, drift: f64 },

    #[error("expected {expected} parameters, got {found}")]
    ParameterCount { expected: usize, found: usize },

    #[error("parameter slot {0} is not referenced by any gate")]
    UnusedParameter(usize),

    #[error("gate {0} cannot be bound to a parameter")]
    NotParameterizable(String),

    #[error("unknown ansatz {0:?}")]
    UnknownAnsatz(String),

    #[error("ansatz {name} cannot prepare level {level} on {n} spins")]
    UnsupportedAnsatz { name: String, n: usize, level: usize },

    #[error("gate is not unitary: {0}")]
    NonUnitary(String),

    #[error("readout confusion matrix is singular (p0 + p1 = {0})")]
    SingularConfusion(f64),

    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),

    #[error("grid interpolation requires exactly 2 parameters, ansatz has {0}")]
    GridDimension(usize),

    #[error("grid database missing for grid_interp mode")]
    MissingGrid,

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("non-finite parameters at step {step} (t = {t}): {theta:?}")]
    NonFinite { step: usize, t: f64, theta: Vec<f64> },

    #[error("bootstrap requires at least 2 samples, got {0}")]
    TooFewSamples(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
