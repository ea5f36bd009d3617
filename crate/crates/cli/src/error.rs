use thiserror::Error;

/// Failure classes mapped to the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] tapol_core::Error),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use tapol_core::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(E::Config { .. } | E::UnknownPreset(_)) => 1,
            CliError::Invalid(_) | CliError::Core(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
