use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] mcflow::Error),

    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0} compared run(s) failed")]
    RunsFailed(usize),

    #[error("cannot read {path}: {message}")]
    Input { path: PathBuf, message: String },
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
