use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("degenerate immersion at node {node}: det g = {det:.3e} below floor {floor:.3e}")]
    DegenerateImmersion { node: usize, det: f64, floor: f64 },

    #[error("non-finite value in {what} at node {node}")]
    NonFinite { what: &'static str, node: usize },

    #[error(
        "linear solver stalled after {iterations} iterations (relative residual {residual:.3e})"
    )]
    SolverFailure { iterations: usize, residual: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format: {0}")]
    Format(String),

    #[error("row count mismatch: expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Numerical failures: the flow hit a state the scheme cannot continue from.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateImmersion { .. }
                | Error::NonFinite { .. }
                | Error::SolverFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
