use thiserror::Error;

/// Errors raised while building, validating or simulating circuits.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("qubit count mismatch: expected {expected}, found {found}")]
    QubitCountMismatch { expected: usize, found: usize },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("qubit {qubit} out of range for a {qubit_count}-qubit circuit")]
    QubitOutOfRange { qubit: usize, qubit_count: usize },

    #[error("register conflict: {0}")]
    RegisterConflict(String),

    #[error("unknown register `{0}`")]
    UnknownRegister(String),

    #[error("{requested} qubits exceeds the engine ceiling of {ceiling}")]
    Capacity { requested: usize, ceiling: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
