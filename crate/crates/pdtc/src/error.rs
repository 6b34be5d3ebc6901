use std::path::{Path, PathBuf};

use crate::config::ConfigErrors;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("invalid configuration:\n{0}")]
    Config(#[from] ConfigErrors),

    #[error("could not parse configuration: {0}")]
    Parse(String),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input {path}: {reason}")]
    Input { path: PathBuf, reason: String },

    #[error(transparent)]
    Core(#[from] pdtc_core::Error),
}

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for anything the user can fix in their input, 2 for pipeline failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Parse(_) | AppError::Usage(_) | AppError::Input { .. } => 1,
            AppError::Io { .. } | AppError::Core(_) => 2,
        }
    }
}
