use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Failures while reading, validating or writing a dataset.
///
/// Record-level variants carry the zero-based record index (or one-based
/// line number for line-oriented formats) but never the record content.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: malformed document: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("record {index}: {message}")]
    Invalid { index: usize, message: String },
    #[error("line {line}: {message}")]
    InvalidLine { line: usize, message: String },
    #[error("record {index}: duplicate id")]
    DuplicateId { index: usize },
    #[error("datasets do not line up: {0}")]
    Misaligned(String),
    #[error("expected a {expected} dataset, got {actual}")]
    WrongTask {
        expected: &'static str,
        actual: &'static str,
    },
}

/// Failures of a simplification backend that abort a whole batch.
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid backend spec: {0}")]
    Spec(String),
    #[error("input {index} is empty after trimming")]
    EmptyInput { index: usize },
    #[error("backend failed to start: {0}")]
    Startup(String),
    #[error("backend transport failure: {0}")]
    Transport(String),
    #[error("backend protocol violation: {0}")]
    Protocol(String),
    #[error("backend timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("lexicon {path}: {message}")]
    Lexicon { path: PathBuf, message: String },
}

/// An augmentation plan that is inconsistent with itself or its dataset.
#[derive(Debug, Error)]
pub enum PlanError {
    #[error("fraction must lie in [0, 1], got {0}")]
    FractionOutOfRange(f64),
    #[error("strategy {0} requires a fraction")]
    MissingFraction(&'static str),
    #[error("{0}")]
    Incompatible(String),
}

/// Any failure of an augmentation or evaluation-preparation run.
#[derive(Debug, Error)]
pub enum AugmentError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}
