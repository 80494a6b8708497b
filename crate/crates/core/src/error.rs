use std::fmt;

use crate::tensor::DType;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("geometry error in {op}: {detail}")]
    Geometry { op: &'static str, detail: String },

    #[error("dtype mismatch: expected {expected}, found {found}")]
    DType { expected: DType, found: DType },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("missing gradient for parameter `{0}`")]
    MissingGradient(String),

    #[error("integrity error at byte {offset}: {detail}")]
    Integrity { offset: u64, detail: String },

    #[error("parse error at byte {offset}: {detail}")]
    Parse { offset: u64, detail: String },

    #[error("incompatible checkpoint: model expects fingerprint {expected}, checkpoint has {found}")]
    IncompatibleCheckpoint { expected: String, found: String },

    #[error("training diverged: non-finite loss at step {step}")]
    Divergence { step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl fmt::Display) -> Self {
        Error::Dimension { op, detail: detail.to_string() }
    }

    pub(crate) fn geometry(op: &'static str, detail: impl fmt::Display) -> Self {
        Error::Geometry { op, detail: detail.to_string() }
    }

    pub(crate) fn integrity(offset: u64, detail: impl fmt::Display) -> Self {
        Error::Integrity { offset, detail: detail.to_string() }
    }

    /// True for errors caused by bad user input (configuration, arguments,
    /// incompatible artifacts) rather than by corrupt data or the runtime.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Dimension { .. }
                | Error::Geometry { .. }
                | Error::Contract(_)
                | Error::Config(_)
                | Error::Validation(_)
                | Error::MissingGradient(_)
                | Error::IncompatibleCheckpoint { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
