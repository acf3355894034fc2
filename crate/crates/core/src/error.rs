use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("requested {requested} items but only {available} are available")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("vocabulary size mismatch: {left} vs {right}")]
    VocabSizeMismatch { left: usize, right: usize },

    #[error("unknown domain `{0}`")]
    UnknownDomain(String),

    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("embedder fingerprint mismatch: {left} vs {right}")]
    FingerprintMismatch { left: String, right: String },

    #[error("dangling sentence id `{0}`")]
    DanglingId(String),

    #[error("domain `{domain}` has {docs} documents, too few to split at holdout fraction {fraction}")]
    Unsplittable {
        domain: String,
        docs: usize,
        fraction: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("invalid embedding file: {0}")]
    BadEmbedding(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SampleTooLarge { .. } => "sample_too_large",
            Error::VocabSizeMismatch { .. } => "vocab_size_mismatch",
            Error::UnknownDomain(_) => "unknown_domain",
            Error::TooFew { .. } => "too_few",
            Error::Empty(_) => "empty",
            Error::FingerprintMismatch { .. } => "fingerprint_mismatch",
            Error::DanglingId(_) => "dangling_id",
            Error::Unsplittable { .. } => "unsplittable",
            Error::InvalidParam(_) => "invalid_param",
            Error::Parse { .. } => "parse",
            Error::BadEmbedding(_) => "bad_embedding",
            Error::Io { .. } => "io",
        }
    }

    /// True for errors caused by bad caller arguments rather than bad data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidParam(_))
    }
}
