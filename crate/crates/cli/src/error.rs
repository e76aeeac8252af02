use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const IO: i32 = 2;
    pub const BACKEND: i32 = 3;
    pub const USAGE: i32 = 64;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Io { .. } => exit::IO,
            CliError::Backend(_) => exit::BACKEND,
        }
    }

    pub fn invalid(msg: impl std::fmt::Display) -> Self {
        CliError::Validation(msg.to_string())
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
