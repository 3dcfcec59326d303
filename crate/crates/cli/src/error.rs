use thiserror::Error;

/// Failure of a CLI command, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(lockdown::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<lockdown::Error> for CliError {
    fn from(e: lockdown::Error) -> Self {
        match e {
            lockdown::Error::InvalidInput(msg) => CliError::Config(msg),
            // parameters outside the closed forms' domain are a bad request
            e @ lockdown::Error::Regime(_) => CliError::Config(e.to_string()),
            lockdown::Error::Io(msg) => CliError::Io(std::io::Error::other(msg)),
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    /// 1 for bad input or unwritable output, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
