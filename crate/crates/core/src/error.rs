use std::path::PathBuf;

use thiserror::Error;

use crate::discovery::NotearsTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("optimization failure: {message}")]
    Optimization {
        message: String,
        trace: Box<NotearsTrace>,
    },

    #[error("response parse failure: {0}")]
    Response(String),

    #[error("aggregation error: missing formulations {missing:?}")]
    Aggregation { missing: Vec<String> },

    #[error("replay cache miss for key {key}")]
    CacheMiss { key: String },

    #[error("transport error (retriable: {retriable}): {message}")]
    Transport { retriable: bool, message: String },

    #[error("authentication failure: {0}")]
    Auth(String),

    #[error("condition {condition} failed: {failed} of {runs} runs failed ({diagnostic})")]
    ConditionFailed {
        condition: String,
        failed: usize,
        runs: usize,
        diagnostic: String,
    },

    #[error("report incomplete: {} missing cells, first: {}", gaps.len(), gaps.first().map(String::as_str).unwrap_or("-"))]
    Gaps { gaps: Vec<String> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("plot error: {0}")]
    Plot(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether a gateway call that produced this error may be retried.
    pub fn is_retriable(&self) -> bool {
        matches!(self, Error::Transport { retriable: true, .. })
    }
}
