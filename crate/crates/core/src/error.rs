use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("messages of event `{0}` are not sorted by timestamp")]
    Unsorted(String),

    #[error("term `{0}` does not occur in any document; idf is undefined")]
    TermAbsent(String),

    #[error("k = {k} exceeds the {distinct} distinct values available; choose a smaller k")]
    TooFewDistinct { k: usize, distinct: usize },

    #[error("clustering degenerated: {0}")]
    Degenerate(String),

    #[error("keyword pair {0} has no message set")]
    MissingPair(String),

    #[error("training data must contain both classes")]
    SingleClass,

    #[error("could not draw a split with both classes present after {0} attempts")]
    SplitFailed(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
