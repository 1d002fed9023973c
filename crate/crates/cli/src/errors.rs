//! Error classification and process exit codes.
//!
//! 0 success, 2 input error, 3 numeric failure, 4 configuration error.

use lccmix_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Config(_) => 4,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        let msg = err.to_string();
        match err {
            CoreError::NonFiniteValue { .. }
            | CoreError::DimensionMismatch(_)
            | CoreError::TooFewObservations { .. }
            | CoreError::DegenerateData => CliError::Input(msg),
            CoreError::NotPositiveDefinite
            | CoreError::RuleTooCoarse(_)
            | CoreError::OnBoundary
            | CoreError::TooManyFailures { .. } => CliError::Numeric(msg),
            _ => CliError::Config(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Input(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
