use std::fmt;

use serde::Serialize;

/// Category reported in the error JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Usage,
    Config,
    Input,
    Model,
    Io,
    Verification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn usage(m: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, m)
    }

    pub fn config(m: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, m)
    }

    pub fn input(m: impl Into<String>) -> Self {
        Self::new(ErrorKind::Input, m)
    }

    /// Process exit code: 2 for usage errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self, verb: Option<&str>) -> String {
        let v = serde_json::json!({
            "schema_version": crate::SCHEMA_VERSION,
            "error": {
                "kind": self.kind,
                "message": self.message,
                "verb": verb,
            }
        });
        v.to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<cgalqr::Error> for CliError {
    fn from(e: cgalqr::Error) -> Self {
        let kind = match e {
            cgalqr::Error::InvalidConfig(_) => ErrorKind::Config,
            cgalqr::Error::InvalidData(_) => ErrorKind::Input,
            _ => ErrorKind::Model,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(ErrorKind::Io, e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::new(ErrorKind::Io, e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new(ErrorKind::Io, e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
