use thiserror::Error;

/// Errors raised while validating inputs or searching for a design.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    /// A parameter violates its documented invariant.
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },

    /// The correlation matrix (or a covariance built from it) could not be factorized.
    #[error("correlation matrix is not positive semidefinite (pivot {pivot} = {value:e})")]
    NotPositiveSemidefinite { pivot: usize, value: f64 },

    #[error("index out of range: {what} = {index}, limit {limit}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("dimension mismatch: {what} expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// The rejection probability does not straddle the target inside the search bracket.
    #[error(
        "cannot bracket the target rejection rate {target}: \
         rate({lo}) = {rate_lo}, rate({hi}) = {rate_hi}; widen the bracket"
    )]
    Bracket {
        target: f64,
        lo: f64,
        hi: f64,
        rate_lo: f64,
        rate_hi: f64,
    },

    /// No per-stage sample size up to the cap reaches the requested power.
    #[error("no feasible design: power {power:.4} at n = {n} is below the target {target}")]
    NoFeasibleDesign { n: usize, power: f64, target: f64 },
}

impl DesignError {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        DesignError::Invalid {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DesignError>;
