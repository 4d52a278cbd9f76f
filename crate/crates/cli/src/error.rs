use std::io;
use std::path::PathBuf;

use coarse_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    /// 2 invalid config, 3 precondition violation, 4 cap exceeded, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Verification(_) | CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                CoreError::InvalidArgument(_)
                | CoreError::EmptyLibrary
                | CoreError::MalformedEnumeration(_)
                | CoreError::Descriptor(_) => 2,
                CoreError::LengthMismatch { .. } | CoreError::PrefixTooShort { .. } => 3,
                CoreError::CapExceeded { .. } => 4,
                CoreError::Io(_) => 1,
            },
        }
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
