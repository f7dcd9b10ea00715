use thiserror::Error;

/// Failures of a CLI command, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed CSV {path}: {reason}")]
    Csv { path: String, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("audit violation: {0}")]
    Audit(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) | CliError::Csv { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Audit(_) => 4,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn csv(path: impl AsRef<std::path::Path>, reason: impl Into<String>) -> Self {
        CliError::Csv {
            path: path.as_ref().display().to_string(),
            reason: reason.into(),
        }
    }
}

impl From<cgb_core::Error> for CliError {
    fn from(e: cgb_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
