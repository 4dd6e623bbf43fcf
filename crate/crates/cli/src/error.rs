use std::fmt;
use std::path::Path;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Runtime,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Runtime => 3,
            ErrorKind::Io => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Config, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Runtime, message: message.into() }
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        CliError { kind: ErrorKind::Io, message: format!("{}: {err}", path.display()) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            ErrorKind::Config => "config error",
            ErrorKind::Runtime => "error",
            ErrorKind::Io => "i/o error",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

impl std::error::Error for CliError {}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
