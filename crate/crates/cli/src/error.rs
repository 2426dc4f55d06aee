use std::path::PathBuf;

use thiserror::Error;

/// Failure of a CLI run; each variant maps to one exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    /// Short machine-readable tag printed before the message.
    pub fn tag(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Input(_) => "input",
            CliError::Numerical(_) => "numerical",
            CliError::Io { .. } => "io",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Single-line `tag: message` record for standard error.
    pub fn record(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("{}: {}", self.tag(), msg.trim())
    }
}

impl From<magnonlink_core::Error> for CliError {
    fn from(e: magnonlink_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
