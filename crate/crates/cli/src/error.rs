use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Core(#[from] lon_core::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().to_path_buf(), source }
    }

    /// Process exit status: 1 usage, 2 numeric failure, 3 IO.
    pub fn exit_code(&self) -> i32 {
        use lon_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io { .. } | CliError::Csv(_) => 3,
            CliError::Core(e) => match e {
                E::Numeric(_) => 2,
                E::Io(_) | E::Csv(_) | E::Parse { .. } => 3,
                E::Argument(_) | E::Dimension(_) => 1,
            },
        }
    }
}
