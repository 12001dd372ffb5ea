use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite score at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("row {row}: label {label} outside [0, {n_classes})")]
    LabelOutOfRange {
        row: usize,
        label: i64,
        n_classes: usize,
    },

    #[error("row {row}: probabilities sum to {sum}, expected 1")]
    NotNormalized { row: usize, sum: f64 },

    #[error("row {row}, column {column}: probability {value} outside [0, 1]")]
    ProbabilityOutOfRange { row: usize, column: usize, value: f64 },

    #[error("confidence {value} at index {index} outside [0, 1]")]
    ConfidenceOutOfRange { index: usize, value: f64 },

    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("bad magic bytes {found:?}, expected \"CLBX\"")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported logits file version {0}")]
    UnsupportedVersion(u16),

    #[error("unknown score-kind flag {0}")]
    BadKindFlag(u8),

    #[error("truncated logits file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("logits file has {extra} trailing bytes after the declared records")]
    TrailingBytes { extra: usize },

    #[error("line {line}: expected {expected} cells, found {found}")]
    RaggedRow {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}, column {column}: cannot parse {text:?} as a number")]
    NonNumeric {
        line: usize,
        column: usize,
        text: String,
    },

    #[error("bad CSV header: {0}")]
    BadHeader(String),

    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("temperature scaling needs logits, got probabilities")]
    RequiresLogits,

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("HCS is undefined for accuracy 0 and ECE 1")]
    UndefinedHcs,

    #[error("cannot parse architecture at byte {position}: {message}")]
    ParseArch { position: usize, message: String },

    #[error("architecture {0} is not in the benchmark")]
    MissingArchitecture(String),

    #[error("search space exhausted: {0}")]
    Exhausted(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
