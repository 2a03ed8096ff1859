use std::fmt;
use std::process::ExitCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Validation,
    Numerical,
}

/// A failed run: exit 1 for bad input or configuration, 2 for numerics.
#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Validation,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Numerical,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self.kind {
            Kind::Validation => ExitCode::from(1),
            Kind::Numerical => ExitCode::from(2),
        }
    }
}

impl fmt::Display for CliError {
    /// `error[validation]: reason` on a single line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            Kind::Validation => "validation",
            Kind::Numerical => "numerical",
        };
        let flat: Vec<&str> = self.message.split_whitespace().collect();
        write!(f, "error[{kind}]: {}", flat.join(" "))
    }
}

impl From<sncf_core::Error> for CliError {
    fn from(e: sncf_core::Error) -> Self {
        if e.is_numerical() {
            Self::numerical(e.to_string())
        } else {
            Self::validation(e.to_string())
        }
    }
}

pub fn io_error(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::validation(format!("{}: {e}", path.display()))
}
