use std::path::PathBuf;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write output: {0}")]
    Stdout(#[source] std::io::Error),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Model(#[from] qillum::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Config(_) | Self::Model(_) => ExitCode::from(1),
            Self::Io { .. } | Self::Stdout(_) => ExitCode::from(2),
            Self::Verification(_) => ExitCode::from(3),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
