use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {what} must be {expected}, got {value}")]
    Domain {
        what: &'static str,
        expected: &'static str,
        value: f64,
    },

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error(
        "Gram matrix singular in {redraws} redraws for {samples} samples (more than 1%); M is too close to K"
    )]
    SingularGram { redraws: usize, samples: usize },

    #[error("invalid inverse-Gram estimate for user {user}: {value}")]
    InvalidEstimate { user: usize, value: f64 },

    #[error("misuse: {0}")]
    Misuse(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
