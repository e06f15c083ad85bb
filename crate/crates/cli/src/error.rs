use thiserror::Error;

use jointshrink_core::Error as CoreError;
use jointshrink_simlab::SimError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input.
    #[error("{0}")]
    Input(String),
    /// The estimator or an experiment failed on valid input.
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Domain(_) | CoreError::DimensionMismatch { .. } => CliError::Input(e.to_string()),
            CoreError::NotPositiveDefinite(_) | CoreError::Numerical(_) | CoreError::Precondition(_) => {
                CliError::Solver(e.to_string())
            }
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Spec(_) => CliError::Input(e.to_string()),
            SimError::Core(c) => c.into(),
            other => CliError::Solver(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}
