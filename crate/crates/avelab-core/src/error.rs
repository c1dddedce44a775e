//! Error type shared by all modules.

use thiserror::Error;

/// Everything that can go wrong constructing or combining the crate's values.
///
/// Numerical "failures" that are legitimate mathematical outcomes (an infinite
/// KL divergence, a chain that has not mixed by a cap) are returned as values,
/// not errors; this enum is for violated preconditions and invariants.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("row {row} sums to {sum}, not 1 within {tol}")]
    RowSum { row: usize, sum: f64, tol: f64 },

    #[error("entry ({row},{col}) = {value} is negative beyond clipping tolerance")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("weights sum to {sum}, not 1 within {tol}")]
    NotADistribution { sum: f64, tol: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("state {state} has zero mass; this operation needs strictly positive weights")]
    ZeroMassState { state: usize },

    #[error("kernel is not stationary for the given distribution (residual {residual:.3e})")]
    NotStationary { residual: f64 },

    #[error("map is not a bijection of 0..{n}")]
    NotBijective { n: usize },

    #[error("element list is not a group: {reason}")]
    NotAGroup { reason: String },

    #[error("group closure exceeded cap of {cap} elements")]
    GroupCapExceeded { cap: usize },

    #[error("invalid pair measure: {0}")]
    InvalidPairMeasure(String),

    #[error("distribution is not invariant under the group (max deviation {deviation:.3e}); use the state-dependent averaging operations instead")]
    NotGroupInvariant { deviation: f64 },

    #[error("state space too large for {what}: {size} exceeds {max}")]
    TooLarge {
        what: &'static str,
        size: usize,
        max: usize,
    },

    #[error("spectral radius on mean-zero functions is {rho}, too close to 1 for a stable solve")]
    UnitSpectralRadius { rho: f64 },

    #[error("distance did not cross the threshold within {t_max} steps")]
    NotMixedBy { t_max: usize },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
