use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::manifest::ManifestError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{context}: {source}")]
    Core {
        context: String,
        source: gradsr_core::Error,
    },
}

impl CliError {
    /// Process exit status: 2 for invalid input, 3 for I/O failures, 4 for
    /// numeric failures including low-confidence registration.
    pub fn exit_code(&self) -> i32 {
        use gradsr_core::Error as E;
        match self {
            CliError::Validation(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Core { source, .. } => match source {
                E::Numeric(_) | E::LowConfidence { .. } | E::EmptyGrid => 4,
                E::Parse { .. } | E::Dimension(_) | E::InvalidArgument { .. } | E::DegenerateInput(_) => 2,
            },
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub(crate) trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for gradsr_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core {
            context: what(),
            source,
        })
    }
}
