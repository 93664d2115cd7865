//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by data handling, inference, and estimation.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two arguments that must agree in shape did not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A non-finite value appeared where a finite one is required.
    /// `index` identifies the offending observation or draw.
    #[error("non-finite value at index {index}: {context}")]
    NonFinite { index: usize, context: String },

    /// Input was degenerate in a way that makes the operation undefined
    /// (zero-variance tail, all-identical draws, zero weights, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An iterative procedure failed to converge or a chain left the
    /// support of the target.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Filesystem problem, annotated with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed CSV input, annotated with the path involved.
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    /// Problem in a run configuration file or CLI arguments.
    #[error("config error: {0}")]
    Config(String),

    /// A pipeline stage failed; wraps the underlying error with the
    /// stage label so partial results can be attributed.
    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with a pipeline stage label.
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// True for errors that indicate a numerical/statistical failure rather
    /// than a configuration problem (used for process exit codes).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Config(_) | Error::InvalidInput(_) | Error::Io { .. } | Error::Csv { .. } => {
                false
            }
            Error::Stage { source, .. } => source.is_numerical(),
            _ => true,
        }
    }
}
