use std::path::PathBuf;

use anion_forge_core::Error as CoreError;

pub type Result<T, E = ForgeError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum ForgeError {
    /// Bad flags or configuration values.
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("config hash mismatch: {artifact} was produced by {found}, current config is {expected} (use --force to override)")]
    HashMismatch {
        artifact: String,
        found: String,
        expected: String,
    },
    #[error("external command `{command}`: {message}")]
    External { command: String, message: String },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Data(String),
}

impl ForgeError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ForgeError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for usage errors, 2 for everything data related.
    pub fn exit_code(&self) -> i32 {
        match self {
            ForgeError::Usage(_) => 1,
            _ => 2,
        }
    }
}
