use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the assessment, explanation, and study pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("unknown joint `{0}`")]
    UnknownJoint(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("training diverged at epoch {epoch}, sample {sample}: loss = {loss}")]
    Diverged { epoch: usize, sample: usize, loss: f64 },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("phase order violation: {0}")]
    PhaseOrder(String),

    #[error("duplicate record: {0}")]
    Duplicate(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
