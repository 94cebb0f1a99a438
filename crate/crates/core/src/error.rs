use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by estimators, samplers and sweep drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("{path}: row {row}, column {column}: {message}")]
    Csv {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("sinkhorn did not converge after {iterations} iterations (marginal violation {violation:e})")]
    NotConverged { iterations: usize, violation: f64 },

    #[error("degenerate bandwidth")]
    DegenerateBandwidth,

    #[error("negative divergence {value:e} below clamp threshold {threshold:e}")]
    NegativeDivergence { value: f64, threshold: f64 },

    #[error("direction {index}: {source}")]
    AtDirection {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate sweep: {0}")]
    DegenerateSweep(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
