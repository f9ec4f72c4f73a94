use std::path::{Path, PathBuf};

use ldh_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(path: &Path, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 configuration, 3 data, 4 numerical.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Invalid(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &CoreError) -> u8 {
    if e.is_numerical() {
        return 4;
    }
    match e {
        CoreError::Stage { source, .. } | CoreError::Frame { source, .. } => core_exit_code(source),
        CoreError::BandExceedsNyquist { .. }
        | CoreError::InvalidBand(_)
        | CoreError::CarrierOutOfRange(_)
        | CoreError::StackShorterThanWindow { .. }
        | CoreError::InvalidParameter(_)
        | CoreError::AlreadyReverseContrast
        | CoreError::EmptyMask => 2,
        _ => 3,
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
