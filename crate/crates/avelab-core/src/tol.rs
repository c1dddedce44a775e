//! Centralized absolute tolerances.
//!
//! Every comparison in the crate cites one of these constants (or a caller
//! override) so that test assertions, runtime validation, and documentation
//! agree on what "equal" means at each trust level.

/// Row sums, stationarity, reversibility, and other stochasticity checks.
/// Accumulating n² products of doubles leaves residuals well below this.
pub const STOCHASTIC: f64 = 1e-10;

/// Probability-vector normalization (Σ weights = 1).
pub const DISTRIBUTION: f64 = 1e-12;

/// Equalities derived across several operations (e.g. composing an average
/// two different ways); looser because errors compound.
pub const DERIVED: f64 = 1e-8;

/// Negative floating-point dust from subtractive cancellation: entries in
/// `(-ENTRY_CLIP, 0)` are clipped to zero, anything more negative is an error.
pub const ENTRY_CLIP: f64 = 1e-14;

/// Eigenvalue clustering for multiplicity detection in eigenspace extraction.
pub const EIGEN_CLUSTER: f64 = 1e-9;

/// Residual bound for linear solves (Poisson equation in asymptotic variance).
pub const SOLVE_RESIDUAL: f64 = 1e-10;

/// Tight entrywise identities that hold by construction (involutions,
/// projector idempotence, exact matrix reproductions).
pub const EXACT: f64 = 1e-12;

/// Returns true when `a` and `b` agree within absolute tolerance `tol`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
