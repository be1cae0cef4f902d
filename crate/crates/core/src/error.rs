use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is out of range or inconsistent.
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Input data is unusable for the requested operation.
    #[error("data error: {0}")]
    Data(String),

    /// DCBM parameters violate the model constraints.
    #[error("invalid model: {0}")]
    Model(String),

    #[error("eigensolver did not converge after {restarts} restarts (residuals: {residuals:?})")]
    NoConvergence {
        restarts: usize,
        residuals: Vec<f64>,
    },

    /// The population eigenproblem has a repeated eigenvalue.
    #[error("degenerate spectrum: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Broad failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Argument,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Argument(_) => ErrorKind::Argument,
            Error::Parse { .. } | Error::Data(_) | Error::Io(_) | Error::Model(_) => {
                ErrorKind::Data
            }
            Error::NoConvergence { .. } | Error::Degenerate(_) => ErrorKind::Numerical,
        }
    }
}
