use std::path::{Path, PathBuf};

use chipprint_core::Error as CoreError;

/// Process exit codes of the command-line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const REJECT: i32 = 1;
    pub const ALIGNMENT: i32 = 2;
    pub const MASK: i32 = 3;
    pub const INCOMPATIBLE: i32 = 4;
    pub const CONFIG: i32 = 10;
    pub const IO: i32 = 11;
    pub const OTHER: i32 = 12;
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Format { path: PathBuf, line: usize, msg: String },
    #[error("configuration: {0}")]
    Config(String),
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(CoreError::AlignmentFailed { .. }) => exit::ALIGNMENT,
            AppError::Core(CoreError::Mask(_) | CoreError::NotEnoughPixels { .. }) => exit::MASK,
            AppError::Core(CoreError::IncompatibleFingerprints(_)) => exit::INCOMPATIBLE,
            AppError::Core(_) => exit::OTHER,
            AppError::Io { .. } | AppError::Format { .. } => exit::IO,
            AppError::Config(_) => exit::CONFIG,
        }
    }
}
