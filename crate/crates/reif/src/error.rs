use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot read {path}: {reason}")]
    Input { path: PathBuf, reason: String },
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] reif_core::Error),
    #[error("certificate is partial: bad balls remain after depth {depth}")]
    Partial { depth: usize },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn input(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        CliError::Input { path: path.into(), reason: reason.to_string() }
    }

    /// 2 invalid configuration, 3 unreadable input, 4 partial certificate,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input { .. } => 3,
            CliError::Partial { .. } => 4,
            _ => 1,
        }
    }
}
