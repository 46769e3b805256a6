use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("non-numeric value {value:?} at row {row}, column {column} of {path}")]
    NonNumeric {
        path: PathBuf,
        row: usize,
        column: usize,
        value: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid response: {0}")]
    InvalidResponse(String),

    #[error("invalid grouping: {0}")]
    InvalidGroups(String),

    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("all columns of the design are constant")]
    AllColumnsConstant,

    #[error("coordinate descent did not converge at lambda index {lambda_index} after {iterations} iterations")]
    NotConverged { lambda_index: usize, iterations: usize },

    #[error("saturated fit at lambda index {lambda_index}: |eta| exceeded {limit}")]
    Saturated { lambda_index: usize, limit: f64 },

    #[error("cross-validation fold {fold} is degenerate: {reason}")]
    DegenerateFold { fold: usize, reason: String },

    #[error("oracle precondition failed: {0}")]
    Oracle(String),

    #[error("strategies disagree: max coefficient deviation {deviation:.3e} exceeds {tolerance:.1e}")]
    PathMismatch { deviation: f64, tolerance: f64 },
}

impl Error {
    /// Short machine-readable tag for the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Csv { .. } => "csv",
            Error::NonNumeric { .. } => "non_numeric",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidResponse(_) => "invalid_response",
            Error::InvalidGroups(_) => "invalid_groups",
            Error::InvalidPenalty(_) => "invalid_penalty",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::AllColumnsConstant => "all_columns_constant",
            Error::NotConverged { .. } => "not_converged",
            Error::Saturated { .. } => "saturated",
            Error::DegenerateFold { .. } => "degenerate_fold",
            Error::Oracle(_) => "oracle",
            Error::PathMismatch { .. } => "path_mismatch",
        }
    }
}
