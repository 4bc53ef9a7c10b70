use std::io;

use thiserror::Error;

/// Errors produced by the engine, the oracles and the dataset tooling.
#[derive(Debug, Error)]
pub enum EmstError {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("non-finite coordinate at point {point}, axis {axis}")]
    InvalidCoordinate { point: usize, axis: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0} (only 2 and 3 are supported)")]
    UnsupportedDimension(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range for {len} points")]
    InvalidIndex { index: usize, len: usize },

    /// Asked for outgoing edges while a single component remains.
    #[error("only one component left, no outgoing edges to find")]
    NothingToFind,

    #[error("component {component} has no outgoing edge")]
    NoOutgoingEdge { component: usize },

    #[error("oracle limited to {cap} points, got {n}")]
    OracleCapExceeded { n: usize, cap: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed binary point file: {0}")]
    InvalidBinary(String),

    #[error("internal invariant violated: {0}")]
    InternalInvariantViolation(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = EmstError> = std::result::Result<T, E>;
