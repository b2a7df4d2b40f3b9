//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by corpus handling, feature extraction, training and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate pair id {0}")]
    DuplicateId(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("degenerate training set: {0}")]
    DegenerateTrainingSet(String),

    #[error("feature schema mismatch: missing [{missing}], extra [{extra}]")]
    SchemaMismatch { missing: String, extra: String },

    #[error("pipeline stage {stage} failed")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
