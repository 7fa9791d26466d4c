use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite (last jitter tried: {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("posterior cache is stale: built for {cached} inputs (hash {cached_key:016x}), queried with {queried} (hash {queried_key:016x})")]
    StaleCache {
        cached: usize,
        cached_key: u64,
        queried: usize,
        queried_key: u64,
    },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("all {} optimizer restarts failed: {}", .diagnostics.len(), .diagnostics.join("; "))]
    OptimizationFailed { diagnostics: Vec<String> },

    #[error("discrete domain exhausted: every candidate has been queried")]
    ExhaustedDomain,

    #[error("meta-task {index}: {source}")]
    Task {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
