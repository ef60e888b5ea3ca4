use std::path::PathBuf;

/// Errors raised by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid scenario, geometry, solver or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Mismatched array/matrix dimensions between inputs.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// An input violated an operation precondition (e.g. a center outside its region).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A numerical subproblem could not be solved.
    #[error("solver failure: {0}")]
    Solver(String),

    /// A subproblem failed inside the alternating loop.
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    /// Too many Monte-Carlo trials failed.
    #[error("{failed} of {total} trials failed (limit is 10%)")]
    TrialFailures { failed: usize, total: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Dimension { .. } | Error::Precondition(_) | Error::Json(_) => {
                true
            }
            Error::Iteration { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
