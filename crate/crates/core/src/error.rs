use thiserror::Error;

use crate::pauli::MAX_QUBITS;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("qubit count {0} exceeds the supported maximum of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("gate is not Clifford: {0}")]
    NonClifford(String),
    #[error("unsupported gate: {0}")]
    UnsupportedGate(String),
    #[error("unsupported rotation axis: {0}")]
    UnsupportedAxis(String),
    #[error("statevector width guard exceeded: {0} qubits")]
    WidthGuard(usize),
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("channel factor with w = 1/2 has no inverse")]
    NonInvertibleChannel,
    #[error("noise not handled by this estimator: {0}")]
    InvalidNoise(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate linear system: {0}")]
    DegenerateSystem(String),
    #[error("sampling budget exhausted: {0}")]
    BudgetExhausted(String),
}

pub type Result<T> = std::result::Result<T, Error>;
