use std::io;
use std::path::Path;

use glitchguard_core::Error as CoreError;
use thiserror::Error;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_MISSING: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

/// A command failure carrying its process exit code.
#[derive(Debug, Error)]
#[error("ERROR {code}: {message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::new(EXIT_CONFIG, message)
    }

    pub fn missing(path: &Path) -> Self {
        CliError::new(EXIT_MISSING, format!("{}: not found", path.display()))
    }

    pub fn io(path: &Path, err: io::Error) -> Self {
        let code = if err.kind() == io::ErrorKind::NotFound {
            EXIT_MISSING
        } else {
            EXIT_FAILURE
        };
        CliError::new(code, format!("{}: {err}", path.display()))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => EXIT_MISSING,
            CoreError::EmptyDirectory(_) => EXIT_MISSING,
            CoreError::InvalidArgument(_) | CoreError::Layer { .. } => EXIT_CONFIG,
            CoreError::NonFiniteLoss { .. } | CoreError::NonFiniteGradient { .. } | CoreError::NonFinite(_) => {
                EXIT_NUMERIC
            }
            _ => EXIT_FAILURE,
        };
        CliError::new(code, e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
