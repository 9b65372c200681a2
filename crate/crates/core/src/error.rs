use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid dimensions {0}x{1}x{2}: every axis needs at least one voxel")]
    EmptyDims(usize, usize, usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "step sizes violate the convergence bound: tau*sigma = {product:.6e} must be < 1/{norm_bound} = {limit:.6e}"
    )]
    StepSize {
        product: f64,
        norm_bound: f64,
        limit: f64,
    },

    #[error("state is infeasible: {0}")]
    Infeasible(String),

    #[error("data outside [0, 1]: min = {min}, max = {max}")]
    OutOfRange { min: f64, max: f64 },

    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. } | Error::EmptyDims(..) | Error::Json(_) => {
                ErrorKind::Config
            }
            Error::StepSize { .. } | Error::Infeasible(_) | Error::NonFinite(_) => {
                ErrorKind::Numerical
            }
            Error::DimensionMismatch { .. }
            | Error::OutOfRange { .. }
            | Error::Format { .. }
            | Error::Io { .. } => ErrorKind::Data,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
