use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("a dataset needs at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("invalid mixture specification: {0}")]
    Spec(String),

    #[error("node {0} has no neighbors in the baseline graph")]
    IsolatedNode(usize),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("no candidate partition has every cluster of size >= {min_size}")]
    NoFeasiblePartition { min_size: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
