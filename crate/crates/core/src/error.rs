use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("unsupported instance: {0}")]
    UnsupportedInstance(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("singular design matrix (min pivot ratio {ratio:e})")]
    SingularDesign { ratio: f64 },

    #[error("incomplete regret table: {0}")]
    IncompleteTable(String),

    #[error("{what} requires at most {limit} agents, got {got}")]
    OverLimit {
        what: &'static str,
        limit: usize,
        got: usize,
    },

    #[error("{path}:{line}: {msg}")]
    Ingestion {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("run failed for coalition {mask:#b}, repetition {rep}: {source}")]
    RunFailed {
        mask: u32,
        rep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
