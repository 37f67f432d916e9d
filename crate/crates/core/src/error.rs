use thiserror::Error;

/// Error type shared by the numeric and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("matrix is not positive semi-definite (eigenvalue {0} below tolerance)")]
    NotPsd(f64),

    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("empty class or dataset: {0}")]
    Empty(String),

    #[error("unknown condition id: {0}")]
    UnknownCondition(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("adaptive solver exceeded the step limit ({0} steps)")]
    StepLimitExceeded(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input at {path} row {row}: {detail}")]
    Format {
        path: String,
        row: usize,
        detail: String,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that should exit with the numerical-failure code.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::StepLimitExceeded(_) | Error::NoConvergence(_) | Error::NotPsd(_)
        )
    }
}
