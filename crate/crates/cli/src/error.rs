use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the command-line driver, each with an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] vqoco::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration errors, 3 for solver non-convergence, 4 for a
    /// failed Slater condition, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                vqoco::Error::InvalidArgument(_)
                | vqoco::Error::Validity(_)
                | vqoco::Error::MissingConstants(_) => 2,
                vqoco::Error::Convergence { .. } => 3,
                vqoco::Error::SlaterViolation { .. } => 4,
                _ => 1,
            },
            CliError::Io { .. } => 1,
        }
    }
}
