use std::fmt;
use std::process::ExitCode;

/// Failure of one command, split by exit code: usage/config problems are the
/// caller's to fix (2), everything else is a runtime failure (1).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<gdcnn::Error> for CliError {
    fn from(e: gdcnn::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Core validation errors raised while building config objects are usage errors.
pub fn invalid(e: gdcnn::Error) -> CliError {
    CliError::Usage(e.to_string())
}
