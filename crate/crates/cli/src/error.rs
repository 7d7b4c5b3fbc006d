use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: parse error at row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: expected a square matrix, found {rows} rows and {cols} columns")]
    NotSquare { path: PathBuf, rows: usize, cols: usize },

    #[error("{path}: row {row} has {got} fields, expected {expected}")]
    Ragged {
        path: PathBuf,
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("{path}: matrix is asymmetric (max |A - Aᵀ| = {max_asymmetry:e} exceeds {tolerance:e})")]
    AsymmetricInput {
        path: PathBuf,
        max_asymmetry: f64,
        tolerance: f64,
    },

    #[error("{path}: diagonal entry {index} is {value}, must be positive")]
    NonPositiveDiagonal { path: PathBuf, index: usize, value: f64 },

    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] InputError),

    #[error("invalid arguments: {0}")]
    Usage(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] covpath::Error),

    #[error("path truncated at grid point {index} (rho = {rho}): {message}")]
    PartialPath { index: usize, rho: f64, message: String },

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status: 2 input, 3 numerical, 4 partial path.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Usage(_) | CliError::Output { .. } => 2,
            CliError::Numerical(covpath::Error::InvalidArgument(_))
            | CliError::Numerical(covpath::Error::DimensionMismatch { .. })
            | CliError::Numerical(covpath::Error::DegenerateInstance { .. }) => 2,
            CliError::Numerical(_) | CliError::VerificationFailed(_) => 3,
            CliError::PartialPath { .. } => 4,
        }
    }

    /// Machine-readable tag for the structured error printed on failure.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input(InputError::Io { .. }) => "io",
            CliError::Input(InputError::Parse { .. }) => "parse_error",
            CliError::Input(InputError::NotSquare { .. }) | CliError::Input(InputError::Ragged { .. }) => "shape",
            CliError::Input(InputError::AsymmetricInput { .. }) => "asymmetric_input",
            CliError::Input(InputError::NonPositiveDiagonal { .. }) => "non_positive_diagonal",
            CliError::Input(InputError::Invalid { .. }) => "invalid_input",
            CliError::Usage(_) => "usage",
            CliError::Numerical(covpath::Error::Infeasible(_)) => "infeasible",
            CliError::Numerical(covpath::Error::DegenerateInstance { .. }) => "degenerate_instance",
            CliError::Numerical(_) => "numerical",
            CliError::PartialPath { .. } => "partial_path",
            CliError::VerificationFailed(_) => "verification_failed",
            CliError::Output { .. } => "output",
        }
    }
}
