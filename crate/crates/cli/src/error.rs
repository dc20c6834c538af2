use std::path::Path;

use thiserror::Error;

/// Command failures, grouped by the process exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<dereverb::Error> for CliError {
    fn from(e: dereverb::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else if matches!(e, dereverb::Error::Numerical(_)) {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}
