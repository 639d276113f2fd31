use thiserror::Error;

/// Errors raised by the rating engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical computation left its domain (non-positive precision,
    /// evidence underflow). Never clamped.
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("snapshot schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: String, expected: u32 },

    #[error("malformed snapshot at line {line}: {reason}")]
    Snapshot { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
