use std::io;

use thiserror::Error;

use crate::train::Checkpoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("insufficient context: need at least {needed} time steps, got {got}")]
    InsufficientContext { needed: usize, got: usize },

    #[error("training diverged at step {step}: {reason}")]
    Diverged {
        step: u64,
        reason: String,
        /// Best checkpoint recorded before the failure, if any epoch completed.
        last_good: Option<Box<Checkpoint>>,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("integrity error at byte {offset}: {reason}")]
    Integrity { offset: u64, reason: String },

    #[error("degenerate reference: {0}")]
    DegenerateReference(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn dataset(msg: impl Into<String>) -> Self {
        Error::Dataset(msg.into())
    }

    pub(crate) fn integrity(offset: u64, reason: impl Into<String>) -> Self {
        Error::Integrity {
            offset,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line tool.
    ///
    /// 2 configuration, 3 dataset, 4 numeric divergence, 5 I/O or integrity.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) | Error::InsufficientContext { .. } => 2,
            Error::Dataset(_) | Error::Report(_) | Error::DegenerateReference(_) => 3,
            Error::Diverged { .. } => 4,
            Error::Format(_) | Error::Integrity { .. } | Error::Io(_) => 5,
            Error::Internal(_) => 1,
        }
    }
}
