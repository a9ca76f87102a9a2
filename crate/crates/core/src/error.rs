use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("distribution families are incompatible: {0}")]
    FamilyMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("exact evaluation is infeasible: {0}")]
    ExactInfeasible(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate guesses: p_hat == q_hat == {0}")]
    DegenerateGuesses(f64),

    #[error("guesses ({p_hat}, {q_hat}) violate the separation guard for xi = {xi}: {reason}")]
    GuardViolation {
        p_hat: f64,
        q_hat: f64,
        xi: f64,
        reason: &'static str,
    },

    #[error("insufficient samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("draw budget exhausted: requested {requested} more draws with {used} of {budget} used")]
    BudgetExhausted { requested: u64, used: u64, budget: u64 },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
