use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input files, flags or configuration.
    #[error("{0}")]
    Input(String),
    /// The computation itself failed or did not converge.
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
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn input(path: &Path, msg: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {msg}", path.display()))
    }
}

impl From<stratdesign::Error> for CliError {
    fn from(e: stratdesign::Error) -> Self {
        if e.is_input() {
            CliError::Input(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
