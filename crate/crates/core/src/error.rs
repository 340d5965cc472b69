use thiserror::Error;

/// Errors surfaced by the simulation engine.
///
/// `InvalidInput` and `Config` are caller mistakes; `Integrity` means an
/// internal invariant broke mid-run and always indicates a bug.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integrity failure: {0}")]
    Integrity(String),

    #[error("configuration has {} error(s):\n{}", .0.len(), .0.join("\n"))]
    Config(Vec<String>),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn integrity(msg: impl Into<String>) -> Self {
        Error::Integrity(msg.into())
    }

    pub fn is_integrity(&self) -> bool {
        matches!(self, Error::Integrity(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
