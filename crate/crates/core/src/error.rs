use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a precondition (non-finite values, too-small images).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is outside its legal range.
    #[error("invalid config `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// Two operands disagree on length or dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A file could not be decoded. `offset` is the byte position of the fault.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    /// A syntactically valid file that uses a variant this crate does not read.
    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn format(offset: u64, reason: impl Into<String>) -> Self {
        Error::Format {
            offset,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code used by the command-line harness.
    ///
    /// 2 covers I/O and decoding failures, 3 covers shape and configuration faults.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format { .. } | Error::Unsupported(_) | Error::Io { .. } => 2,
            Error::InvalidInput(_) | Error::InvalidConfig { .. } | Error::Shape(_) => 3,
        }
    }
}
