use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} outside supported range 1..=20")]
    Size(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported circuit configuration: {0}")]
    Unsupported(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("parameter index {index} out of range (have {count})")]
    Index { index: usize, count: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("training diverged at iteration {iteration}: {what} is not finite")]
    Diverged {
        iteration: usize,
        what: &'static str,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
