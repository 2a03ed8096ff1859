use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A matrix or label file could not be parsed. `row`/`col` are zero-based.
    #[error("{path}: {reason}{}", location(.row, .col))]
    Load {
        path: PathBuf,
        row: Option<usize>,
        col: Option<usize>,
        reason: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("eigensolver did not converge after {iterations} block iterations (max residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

fn location(row: &Option<usize>, col: &Option<usize>) -> String {
    match (row, col) {
        (Some(r), Some(c)) => format!(" (row {r}, column {c})"),
        (Some(r), None) => format!(" (row {r})"),
        _ => String::new(),
    }
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::Numerical(_))
    }

    pub(crate) fn load(path: &std::path::Path, reason: impl Into<String>) -> Self {
        Error::Load {
            path: path.to_path_buf(),
            row: None,
            col: None,
            reason: reason.into(),
        }
    }
}
