use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the laboratory's operations.
#[derive(Debug, Error)]
pub enum LabError {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested abscissa or index exceeds the materialized range.
    #[error("out of range: {what} = {value} exceeds limit {limit}")]
    OutOfRange { what: &'static str, value: f64, limit: f64 },

    /// An operation's precondition on its inputs was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A memory estimate exceeded the configured cap.
    #[error("resource limit: {what} needs ~{needed_bytes} bytes, cap is {cap_bytes} bytes")]
    Resource {
        what: &'static str,
        needed_bytes: u64,
        cap_bytes: u64,
    },

    /// A covariance matrix could not be factorized (not positive semidefinite).
    #[error("factorization error: {0}")]
    Factorization(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error at {path}: {message}")]
    Serialization { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn domain(msg: impl Into<String>) -> LabError {
    LabError::Domain(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> LabError {
    LabError::Precondition(msg.into())
}
