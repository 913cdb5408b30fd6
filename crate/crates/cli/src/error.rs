use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures of a command, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    Data { path: PathBuf, reason: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for configuration, 3 for input/output, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Data { .. } => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().to_path_buf(), source }
    }

    /// Attaches `path` to a library error raised while reading it.
    pub fn at(path: impl AsRef<Path>, e: scenesmc::Error) -> Self {
        let path = path.as_ref().to_path_buf();
        match e {
            scenesmc::Error::Io(source) => CliError::Io { path, source },
            other => CliError::Data { path, reason: other.to_string() },
        }
    }
}

impl From<scenesmc::Error> for CliError {
    fn from(e: scenesmc::Error) -> Self {
        use scenesmc::Error as E;
        match e {
            E::Io(source) => CliError::Io { path: PathBuf::new(), source },
            E::Format { .. } => CliError::Data { path: PathBuf::new(), reason: e.to_string() },
            E::DegenerateWeights
            | E::EmptyRender
            | E::NonPositiveWeights
            | E::DegenerateConcentration { .. }
            | E::EmptyCloud
            | E::EmptyGrid => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}
