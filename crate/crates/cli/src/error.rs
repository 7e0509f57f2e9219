use std::path::PathBuf;

use mip_core::MipError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] MipError),

    #[error("writing {path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl CliError {
    /// Process exit status. 2: bad usage or unreadable input; 3: a column
    /// or the response has zero scale; 1: anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Usage(_) => 2,
            CliError::Core(MipError::InvalidArgument(_) | MipError::InvalidData(_)) => 2,
            CliError::Core(MipError::DegenerateColumn { .. }) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
