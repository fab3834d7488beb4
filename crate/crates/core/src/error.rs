use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the parsing toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: expected 10 tab-separated fields, found {found}")]
    MalformedLine { line: usize, found: usize },

    #[error("line {line}: bad token id {id:?}")]
    BadId { line: usize, id: String },

    #[error("line {line}: bad head {head:?}")]
    BadHead { line: usize, head: String },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("illegal transition {0}")]
    IllegalTransition(String),

    #[error("static oracle stuck: {0}")]
    OracleStuck(String),

    #[error("sentence length must be at least 1")]
    EmptySentence,

    #[error("empty word form")]
    EmptyWord,

    #[error("treebank id {id} out of range (model has {count} treebank embeddings)")]
    TreebankOutOfRange { id: usize, count: usize },

    #[error("treebank id required by a model with treebank embeddings")]
    TreebankRequired,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("empty zero-cost set")]
    EmptyZeroCost,

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("unsupported model version {0}")]
    ModelVersion(String),

    #[error("misaligned input at {0}")]
    Misaligned(String),

    #[error("treebank {0} has no training sentences")]
    EmptyTreebank(String),

    #[error("treebank {0} has no dev set")]
    DevMissing(String),

    #[error("unknown proxy treebank {name:?}; valid names: {valid:?}")]
    UnknownProxy { name: String, valid: Vec<String> },

    #[error("a proxy treebank is required; valid names: {valid:?}")]
    ProxyRequired { valid: Vec<String> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("experiment specification error at {path}: {message}")]
    Spec { path: String, message: String },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors in flags, specification files or proxy choices.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Spec { .. }
                | Error::UnknownProxy { .. }
                | Error::ProxyRequired { .. }
                | Error::TreebankRequired
                | Error::TreebankOutOfRange { .. }
        )
    }

    /// True for errors caused by input data rather than configuration or bugs.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::MalformedLine { .. }
                | Error::BadId { .. }
                | Error::BadHead { .. }
                | Error::InvalidTree(_)
                | Error::EmptyTreebank(_)
                | Error::DevMissing(_)
                | Error::Misaligned(_)
                | Error::ModelFormat(_)
                | Error::ModelVersion(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
