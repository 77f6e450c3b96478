//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A value violates a type invariant (counts that do not add up, unsorted lists, ...).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("elicitation failed: target tail probability {target} outside achievable range [{low:.6}, {high:.6}]")]
    Elicitation { target: f64, low: f64, high: f64 },

    #[error("stopping boundary unreachable at n = {0}")]
    Unreachable(u32),

    #[error("randomisation exhausted: every group is closed in stratum {0}")]
    Exhausted(String),

    /// Quasi-complete separation in the logistic fit.
    #[error("separation detected in cell {0}")]
    Separation(String),

    #[error("information matrix is singular (rank deficient design): {0}")]
    Rank(String),

    #[error("iteration did not converge: {0}")]
    Convergence(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Numerical failures as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Separation(_) | Error::Rank(_) | Error::Convergence(_) | Error::Unreachable(_))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Validation(_) => "validation",
            Error::Elicitation { .. } => "elicitation",
            Error::Unreachable(_) => "unreachable",
            Error::Exhausted(_) => "exhausted",
            Error::Separation(_) => "separation",
            Error::Rank(_) => "rank",
            Error::Convergence(_) => "convergence",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
