use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong in the lab, from reading a corpus to
/// comparing two correlations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: invalid UTF-8", path.display())]
    InvalidUtf8 { path: PathBuf, line: usize },

    #[error("empty corpus: {}", .0.display())]
    EmptyCorpus(PathBuf),

    #[error("{}: missing column `{column}`", path.display())]
    MissingColumn { path: PathBuf, column: String },

    #[error("{}: zero surviving rows ({dropped} dropped)", path.display())]
    NoSurvivingRows { path: PathBuf, dropped: usize },

    #[error("{}:{line}: {message}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("target vocabulary size {target} is below the alphabet size {alphabet}")]
    TargetBelowAlphabet { target: usize, alphabet: usize },

    #[error("degenerate corpus: {0}")]
    DegenerateCorpus(String),

    #[error("cannot encode an empty sequence")]
    EmptySequence,

    #[error("sequence of {len} characters exceeds the {max}-character limit")]
    SequenceTooLong { len: usize, max: usize },

    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("model integrity check failed: {0}")]
    Checksum(String),

    #[error("undefined correlation: {0} has zero variance")]
    ZeroVariance(&'static str),

    #[error("correlation {0} is outside the open interval (-1, 1)")]
    CorrelationOutOfRange(f64),

    #[error("at least {needed} observations required, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{0}")]
    EmptyPartition(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True when the error signals a broken internal guarantee rather than bad
    /// input data.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, Error::Invariant(_))
    }
}
