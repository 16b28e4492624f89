use thiserror::Error;

use crate::recurrence::FamilyName;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A recurrence step produced a value with non-unit denominator.
    #[error("integrality violation in family {family} at n = {n}: value {value}")]
    IntegralityViolation {
        family: String,
        n: usize,
        value: String,
    },

    #[error("length mismatch: {left} entries vs {right} entries")]
    LengthMismatch { left: usize, right: usize },

    #[error("bad input: {0}")]
    InvalidInput(String),

    #[error("precision budget exceeded for {what} at n = {n}: {detail}")]
    PrecisionBudgetExceeded {
        what: String,
        n: usize,
        detail: String,
    },

    #[error("gamma supplied with {have} digits, need at least {need}")]
    InsufficientGammaPrecision { have: u32, need: u32 },

    #[error("non-exact division at step `{0}`")]
    NonExactDivision(String),

    #[error("harmonic moment sum is not an integer: {0}")]
    NonIntegerP(String),

    #[error("cross-check failed for {constant}: routes differ by {difference}")]
    CrossCheckFailed {
        constant: &'static str,
        difference: String,
    },

    #[error("cache file {path}: {reason}")]
    Cache { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn integrality(family: FamilyName, n: usize, value: impl ToString) -> Self {
        Error::IntegralityViolation {
            family: family.as_str().to_string(),
            n,
            value: value.to_string(),
        }
    }
}
