use std::path::PathBuf;

use rarefaction_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for invalid input, 3 for a refused uncertified time, 4 for a
    /// numerical failure, 1 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                CoreError::Uncertified { .. } => 3,
                CoreError::RootBracket { .. } | CoreError::Numeric(_) => 4,
                _ => 2,
            },
        }
    }
}
