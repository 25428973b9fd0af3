use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised while building or evaluating the objects of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The function is identically `+inf`, takes `-inf`, or has NaN coefficients.
    #[error("improper function: {0}")]
    Improper(String),
    #[error("not convex: {0}")]
    NotConvex(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    /// Sizes of grids, trees or processes do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    /// A structural invariant (probabilities, adaptedness, ...) failed.
    #[error("invariant violated at {location}: {reason}")]
    Invariant { location: String, reason: String },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("missing {0}")]
    Missing(String),
}

impl Error {
    pub(crate) fn invariant(location: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invariant {
            location: location.into(),
            reason: reason.into(),
        }
    }
}
