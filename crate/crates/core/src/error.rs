//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("step rejected: {0}")]
    StepRejected(String),
    #[error("qubit budget exceeded: need {needed} qubits, budget is {budget}")]
    Budget { needed: usize, budget: usize },
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
}

impl Error {
    /// Process exit code for the command-line driver.
    ///
    /// 1 configuration, 2 I/O, 3 numerical non-convergence, 4 budget.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 1,
            Error::Io(_) | Error::Parse(_) => 2,
            Error::NonConvergence { .. } | Error::StepRejected(_) | Error::Consistency(_) => 3,
            Error::Budget { .. } => 4,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.into())
        } else {
            Error::Parse(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
