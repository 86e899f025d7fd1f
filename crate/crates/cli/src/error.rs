use thiserror::Error;

/// Exit codes: 2 invalid configuration, 3 numerical failure, 4 profile not
/// converged, 5 failed hypothesis check.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] semiwave_core::Error),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(semiwave_core::Error::InvalidParameter(_)) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 3,
        }
    }
}

pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_CHECK_FAILED: i32 = 5;
