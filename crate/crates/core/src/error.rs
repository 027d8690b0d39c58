//! Error type shared by every solver.

use thiserror::Error;

/// Failures reported by the model functions and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwiptError {
    /// An argument is outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),
    /// A bracketed root search found no sign change.
    #[error("no root in bracket [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },
    /// The requested target exceeds what the constraints allow.
    #[error("target {target} exceeds the achievable maximum {max}")]
    InfeasibleTarget { target: f64, max: f64 },
    /// An iterative search hit its iteration limit.
    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),
    /// The mode-switching equation has fewer than two roots.
    #[error("mode-switching equation has fewer than two roots")]
    NoRootPair,
    /// The brute-force oracle refuses large ensembles.
    #[error("ensemble size {n} exceeds the oracle limit {limit}")]
    GuardrailExceeded { n: usize, limit: usize },
    /// Reading or writing a fixture failed.
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, SwiptError>;

pub(crate) fn domain(msg: impl Into<String>) -> SwiptError {
    SwiptError::Domain(msg.into())
}

impl From<std::io::Error> for SwiptError {
    fn from(e: std::io::Error) -> Self {
        SwiptError::Io(e.to_string())
    }
}

impl From<csv::Error> for SwiptError {
    fn from(e: csv::Error) -> Self {
        SwiptError::Io(e.to_string())
    }
}
