//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SocsError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),
    #[error("unknown agent {0}")]
    UnknownAgent(usize),
    #[error("unknown rate kind `{0}`")]
    UnknownRateKind(String),
    #[error("LP infeasible: {0}")]
    Infeasible(String),
    #[error("LP unbounded")]
    Unbounded,
    #[error("cutting plane did not converge within {0} rounds")]
    NoConvergence(usize),
    #[error("separation support {0} exceeds enumeration cap {1}")]
    SeparationCap(usize, usize),
    #[error("{0} exceeds cap {1} for exact evaluation")]
    SizeCap(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SocsError>;
