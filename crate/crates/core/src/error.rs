use std::io;

use thiserror::Error;

/// Errors raised across the grade-prediction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("unknown letter grade `{0}`")]
    UnknownLetter(String),

    #[error("duplicate record for student `{student}`, course `{course}`, term {term}")]
    DuplicateRecord {
        student: String,
        course: String,
        term: u32,
    },

    #[error("input contains no records")]
    Empty,

    #[error("invalid letter scale: {0}")]
    InvalidScale(String),

    #[error("term {0} is out of range")]
    TermOutOfRange(u32),

    #[error("index {index} out of range for {what} (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("objective diverged at {stage} iteration {iteration}")]
    Diverged { stage: &'static str, iteration: usize },

    #[error("singular value decomposition failed: {0}")]
    Svd(String),

    #[error("value is not finite: {0}")]
    NonFinite(f64),

    #[error("unknown format `{0}`")]
    UnknownFormat(String),

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Errors caused by bad input or configuration rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Malformed { .. }
                | Error::UnknownLetter(_)
                | Error::DuplicateRecord { .. }
                | Error::Empty
                | Error::InvalidScale(_)
                | Error::TermOutOfRange(_)
                | Error::IndexOutOfRange { .. }
                | Error::InvalidConfig(_)
                | Error::UnknownFormat(_)
                | Error::ModelFormat(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
