//! Error type shared by the core modules.

use alloc::string::String;

/// Errors produced by core operations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoreError {
    /// A caller violated an argument contract (shape mismatch, empty input, ...).
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Input data violated an invariant (duplicate id, missing embedding, ...).
    #[error("invalid data: {0}")]
    Data(String),
    /// A line of serialized input could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    /// Numerical failure during training (NaN loss).
    #[error("training diverged: {0}")]
    Diverged(String),
    /// An external verifier could not produce a verdict.
    #[error("verifier failure: {0}")]
    Verifier(String),
}

pub type Result<T> = core::result::Result<T, CoreError>;

impl CoreError {
    pub fn argument(msg: impl Into<String>) -> Self {
        CoreError::Argument(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CoreError::Data(msg.into())
    }
}
