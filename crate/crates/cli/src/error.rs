use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, malformed input or a domain error. Exit code 1.
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io { .. } => 2,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }
}

impl From<stemrisk::Error> for CliError {
    fn from(e: stemrisk::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

/// Attaches the offending file to a library error.
pub(crate) fn in_file(path: &std::path::Path) -> impl FnOnce(stemrisk::Error) -> CliError + '_ {
    move |e| CliError::Invalid(format!("{}: {e}", path.display()))
}

pub type CliResult<T> = Result<T, CliError>;
