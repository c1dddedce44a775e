//! The checked-in table of reference targets.
//!
//! Every number an experiment asserts against lives here, next to the check
//! that consumes it, the tolerance it is owed, and a provenance label saying
//! where the number comes from. Report rows cite the same data, so a failure
//! always names the violated tolerance and both sides of the comparison.
//!
//! Entries whose bound depends on run parameters (for example the cubic
//! spectral floor `(1 − e^{−β})/(36 n³)`) carry no static [`Check`]; the
//! experiment instantiates the formula quoted in `what` at runtime and the
//! report row records the concrete bound used.

use std::fmt;

/// Where a frozen number comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// An externally fixed value the experiment must reproduce: tabulated
    /// worked-example numbers and closed-form bounds.
    Reference,
    /// Frozen output of an independent oracle computation kept in this
    /// repository's tests.
    Derived,
    /// An exact identity; the tolerance only absorbs rounding.
    Definitional,
    /// A theorem-backed inequality or equivalence that must hold for every
    /// valid instance, checked at numerical tolerance.
    Structural,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Reference => "reference",
            Provenance::Derived => "derived",
            Provenance::Definitional => "definitional",
            Provenance::Structural => "structural",
        })
    }
}

/// A comparison applied to one reported value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Check {
    /// `|value − expected| ≤ tol`.
    Eq { expected: f64, tol: f64 },
    /// `value ≥ bound − tol`.
    Ge { bound: f64, tol: f64 },
    /// `value ≤ bound + tol`.
    Le { bound: f64, tol: f64 },
    /// Strict sign agreement; `tol` plays no role.
    Sign { positive: bool },
}

impl Check {
    /// Leftover slack: nonnegative exactly when the check passes (strictly
    /// positive for [`Check::Sign`], which admits no tie at zero).
    pub fn margin(&self, value: f64) -> f64 {
        match *self {
            Check::Eq { expected, tol } => tol - (value - expected).abs(),
            Check::Ge { bound, tol } => value - (bound - tol),
            Check::Le { bound, tol } => (bound + tol) - value,
            Check::Sign { positive } => {
                if positive {
                    value
                } else {
                    -value
                }
            }
        }
    }

    pub fn pass(&self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match self {
            Check::Sign { .. } => self.margin(value) > 0.0,
            _ => self.margin(value) >= 0.0,
        }
    }

    /// The comparison target, echoed into report rows.
    pub fn expected(&self) -> f64 {
        match *self {
            Check::Eq { expected, .. } => expected,
            Check::Ge { bound, .. } | Check::Le { bound, .. } => bound,
            Check::Sign { positive } => {
                if positive {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }

    pub fn tolerance(&self) -> f64 {
        match *self {
            Check::Eq { tol, .. } | Check::Ge { tol, .. } | Check::Le { tol, .. } => tol,
            Check::Sign { .. } => 0.0,
        }
    }

    /// Short operator name for serialized rows: `eq`, `ge`, `le`, `sign+`,
    /// `sign-`.
    pub fn op(&self) -> &'static str {
        match self {
            Check::Eq { .. } => "eq",
            Check::Ge { .. } => "ge",
            Check::Le { .. } => "le",
            Check::Sign { positive: true } => "sign+",
            Check::Sign { positive: false } => "sign-",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Check::Eq { expected, tol } => write!(f, "= {expected} ± {tol:e}"),
            Check::Ge { bound, tol } => write!(f, ">= {bound} - {tol:e}"),
            Check::Le { bound, tol } => write!(f, "<= {bound} + {tol:e}"),
            Check::Sign { positive: true } => f.write_str("> 0"),
            Check::Sign { positive: false } => f.write_str("< 0"),
        }
    }
}

/// One row of the traceability matrix: a named target, the experiment that
/// reproduces it, and the acceptance battery that gates it.
#[derive(Debug, Clone, Copy)]
pub struct TargetSpec {
    /// Stable dotted key, `<experiment>.<metric>`.
    pub key: &'static str,
    pub experiment: &'static str,
    /// Acceptance battery id (`A1`–`A8`), the numbered checks in
    /// `crates/avelab-cli/tests/acceptance.rs`.
    pub battery: &'static str,
    pub what: &'static str,
    pub provenance: Provenance,
    /// `None` when the bound is a runtime formula (quoted in `what`).
    pub check: Option<Check>,
}

use Check::{Eq, Ge, Le, Sign};
use Provenance::{Definitional, Derived, Reference, Structural};

macro_rules! target {
    ($key:literal, $exp:literal, $battery:literal, $prov:expr, $check:expr, $what:literal) => {
        TargetSpec {
            key: $key,
            experiment: $exp,
            battery: $battery,
            what: $what,
            provenance: $prov,
            check: $check,
        }
    };
}

/// The full constants table, grouped by experiment in registry order.
pub static TABLE: &[TargetSpec] = &[
    // uniform-shift: full-cycle left averaging of doubly stochastic chains.
    target!("uniform-shift.projector-gap", "uniform-shift", "A3", Structural,
        Some(Le { bound: 0.0, tol: 1e-12 }),
        "largest |P_la(x,y) − π(y)| over the random doubly stochastic instances"),
    target!("uniform-shift.tmix-deviation", "uniform-shift", "A3", Structural,
        Some(Eq { expected: 0.0, tol: 0.0 }),
        "largest |t_mix − 1| of the left average across instances and L¹/L²/L^∞ norms"),
    // asympvar-3state: hand-tabulated three-state averaging instance.
    target!("asympvar-3state.v-base", "asympvar-3state", "A1", Reference,
        Some(Eq { expected: 0.2353, tol: 5e-4 }),
        "asymptotic variance of the pinned observable under the base chain"),
    target!("asympvar-3state.v-orbit", "asympvar-3state", "A1", Reference,
        Some(Eq { expected: 0.2486, tol: 5e-4 }),
        "asymptotic variance under the orbit average"),
    target!("asympvar-3state.v-double", "asympvar-3state", "A1", Reference,
        Some(Eq { expected: 0.4610, tol: 5e-4 }),
        "asymptotic variance under the left-then-right average"),
    target!("asympvar-3state.orbit-entries", "asympvar-3state", "A1", Reference,
        Some(Le { bound: 0.0, tol: 1e-10 }),
        "largest deviation of the orbit average from its tabulated matrix"),
    target!("asympvar-3state.double-entries", "asympvar-3state", "A1", Reference,
        Some(Le { bound: 0.0, tol: 1e-10 }),
        "largest deviation of the left-then-right average from its tabulated matrix"),
    target!("asympvar-3state.twisted-matches-orbit", "asympvar-3state", "A1", Definitional,
        Some(Le { bound: 0.0, tol: 1e-12 }),
        "with a two-element group of involutions the twisted and orbit averages coincide"),
    target!("asympvar-3state.variance-grows", "asympvar-3state", "A1", Reference,
        Some(Sign { positive: true }),
        "v(f, double average) − v(f, base): averaging hurts this non-invariant observable"),
    // frobenius-counterexamples: squared-Frobenius decomposition residuals.
    target!("frobenius-counterexamples.inst1-lhs", "frobenius-counterexamples", "A2", Reference,
        Some(Eq { expected: 0.4725, tol: 5e-4 }),
        "‖P₁ − Q‖²_F for the first tabulated kernel"),
    target!("frobenius-counterexamples.inst1-rhs-qpq", "frobenius-counterexamples", "A2", Reference,
        Some(Eq { expected: 0.45625, tol: 5e-4 }),
        "‖P₁ − QP₁Q‖²_F + ‖QP₁Q − Q‖²_F"),
    target!("frobenius-counterexamples.inst1-rhs-qp", "frobenius-counterexamples", "A2", Reference,
        Some(Eq { expected: 0.46250, tol: 5e-4 }),
        "‖P₁ − QP₁‖²_F + ‖QP₁ − Q‖²_F"),
    target!("frobenius-counterexamples.inst1-rhs-pq", "frobenius-counterexamples", "A2", Reference,
        Some(Eq { expected: 0.45625, tol: 5e-4 }),
        "‖P₁ − P₁Q‖²_F + ‖P₁Q − Q‖²_F"),
    target!("frobenius-counterexamples.inst1-residual-qpq", "frobenius-counterexamples", "A2",
        Reference, Some(Sign { positive: true }),
        "first instance, QPQ form: lhs exceeds the split"),
    target!("frobenius-counterexamples.inst1-residual-qp", "frobenius-counterexamples", "A2",
        Reference, Some(Sign { positive: true }),
        "first instance, QP form: lhs exceeds the split"),
    target!("frobenius-counterexamples.inst1-residual-pq", "frobenius-counterexamples", "A2",
        Reference, Some(Sign { positive: true }),
        "first instance, PQ form: lhs exceeds the split"),
    target!("frobenius-counterexamples.inst2-lhs", "frobenius-counterexamples", "A2", Reference,
        Some(Eq { expected: 0.9780, tol: 5e-4 }),
        "‖P₂ − Q‖²_F for the second tabulated kernel"),
    target!("frobenius-counterexamples.inst2-rhs-qpq", "frobenius-counterexamples", "A2", Reference,
        Some(Eq { expected: 0.9966, tol: 5e-4 }),
        "‖P₂ − QP₂Q‖²_F + ‖QP₂Q − Q‖²_F"),
    target!("frobenius-counterexamples.inst2-rhs-qp", "frobenius-counterexamples", "A2", Reference,
        Some(Eq { expected: 0.9791, tol: 5e-4 }),
        "‖P₂ − QP₂‖²_F + ‖QP₂ − Q‖²_F"),
    target!("frobenius-counterexamples.inst2-rhs-pq", "frobenius-counterexamples", "A2", Reference,
        Some(Eq { expected: 0.9832, tol: 5e-4 }),
        "‖P₂ − P₂Q‖²_F + ‖P₂Q − Q‖²_F"),
    target!("frobenius-counterexamples.inst2-residual-qpq", "frobenius-counterexamples", "A2",
        Reference, Some(Sign { positive: false }),
        "second instance, QPQ form: the split exceeds lhs"),
    target!("frobenius-counterexamples.inst2-residual-qp", "frobenius-counterexamples", "A2",
        Reference, Some(Sign { positive: false }),
        "second instance, QP form: the split exceeds lhs"),
    target!("frobenius-counterexamples.inst2-residual-pq", "frobenius-counterexamples", "A2",
        Reference, Some(Sign { positive: false }),
        "second instance, PQ form: the split exceeds lhs"),
    target!("frobenius-counterexamples.projector-match", "frobenius-counterexamples", "A2",
        Definitional, Some(Le { bound: 0.0, tol: 1e-12 }),
        "the comparison kernel equals the state-dependent projector Q(G, π)"),
    // trace-2state: one-sided averages need not preserve the trace.
    target!("trace-2state.trace-base", "trace-2state", "A7", Definitional,
        Some(Eq { expected: 0.5, tol: 1e-12 }),
        "π-trace of the symmetric two-state chain with holding weight 0.25"),
    target!("trace-2state.trace-left", "trace-2state", "A7", Definitional,
        Some(Eq { expected: 1.0, tol: 1e-12 }),
        "π-trace of the left average: the off-diagonal weight folds onto the diagonal"),
    target!("trace-2state.trace-right", "trace-2state", "A7", Definitional,
        Some(Eq { expected: 1.0, tol: 1e-12 }),
        "π-trace of the right average"),
    target!("trace-2state.trace-conj-drift", "trace-2state", "A7", Structural,
        Some(Le { bound: 0.0, tol: 1e-10 }),
        "|Tr(conjugation average) − Tr(P)|: orbit averaging preserves the trace"),
    target!("trace-2state.trace-gain", "trace-2state", "A7", Definitional,
        Some(Sign { positive: true }),
        "Tr(P_la) − Tr(P) > 0 when the swapped mass dominates the holding mass"),
    // dhn-counterexample: zero multiplicative gap and the n ↦ n² slowdown.
    target!("dhn-counterexample.gamma-base", "dhn-counterexample", "A4", Reference,
        Some(Le { bound: 0.0, tol: 1e-10 }),
        "largest γ(K) over half-sizes {4, 8, 16}: the drift walk has none"),
    target!("dhn-counterexample.gamma-averaged", "dhn-counterexample", "A4", Reference,
        Some(Le { bound: 0.0, tol: 1e-10 }),
        "largest γ(K_ra) over half-sizes {4, 8, 16}: mirror averaging recovers none"),
    target!("dhn-counterexample.slope-base", "dhn-counterexample", "A4", Reference,
        Some(Eq { expected: 1.0, tol: 0.25 }),
        "log-log slope of t_mix(K) over half-sizes {8, 16, 32, 64} at TV 1/8"),
    target!("dhn-counterexample.slope-averaged", "dhn-counterexample", "A4", Reference,
        Some(Eq { expected: 2.0, tol: 0.25 }),
        "log-log slope of t_mix(K_ra): averaging trades drift for diffusion"),
    target!("dhn-counterexample.slope-ratio", "dhn-counterexample", "A4", Derived,
        Some(Eq { expected: 1.0, tol: 0.25 }),
        "log-log slope of t_mix(K_ra)/t_mix(K) over half-sizes {8, 16, 32}"),
    // vshape: cubic spectral floor and exponential-to-polynomial speedup.
    target!("vshape.lambda-floor", "vshape", "A5", Reference, None,
        "λ(double average) ≥ (1 − e^{−β})/(36 n³) for n ∈ {2..8}, β ∈ {0.5, 1, 2}"),
    target!("vshape.ratio-growth", "vshape", "A5", Reference,
        Some(Ge { bound: 2.0, tol: 0.0 }),
        "min over n of [t_mix(P)/t_mix(lazy avg)](n+1) / [same](n) at β = 2: doubles per site"),
    target!("vshape-perturbed.lambda-floor", "vshape-perturbed", "A5", Reference, None,
        "λ(QPQ) ≥ (1 − e^{−β})/(36 n³ e^{2βδ}) for n ∈ {2..8}, β ∈ {0.5, 1, 2}, δ = 0.3"),
    // ncycle-blockrev: block-reversal averaging of the cycle walk.
    target!("ncycle-blockrev.lambda-floor", "ncycle-blockrev", "A6", Reference, None,
        "λ(P_da) ≥ 1/(k+1)² for n = 2^k, k ∈ {2..6}"),
    target!("ncycle-blockrev.tmix-upper", "ncycle-blockrev", "A6", Reference, None,
        "t_mix(lazy P_da) at TV 1/4 is ≤ 2 (log₂ n + 1)² ln(4n)"),
    target!("ncycle-blockrev.srw-lower", "ncycle-blockrev", "A6", Reference, None,
        "t_mix of the bare cycle walk at TV 1/4 is ≥ n²/32"),
    // cdg-averaging: congruential walk anchors and gap improvement.
    target!("cdg-averaging.gamma-5-2", "cdg-averaging", "A7", Derived,
        Some(Eq { expected: 0.460655, tol: 1e-5 }),
        "γ of the congruential walk, modulus 5, multiplier 2"),
    target!("cdg-averaging.gamma-7-3", "cdg-averaging", "A7", Derived,
        Some(Eq { expected: 0.251007, tol: 1e-5 }),
        "γ of the congruential walk, modulus 7, multiplier 3"),
    target!("cdg-averaging.gamma-11-2", "cdg-averaging", "A7", Derived,
        Some(Eq { expected: 0.105831, tol: 1e-5 }),
        "γ of the congruential walk, modulus 11, multiplier 2"),
    target!("cdg-averaging.improvement", "cdg-averaging", "A7", Structural,
        Some(Ge { bound: 0.0, tol: 1e-9 }),
        "min over instances of γ(left average under the multiplier group) − γ(K)"),
    // sw-check / pt-check / pmmh-check: extended-chain oracle equivalences.
    target!("sw-check.single-edge-marginal", "sw-check", "A8", Structural,
        Some(Le { bound: 0.0, tol: 1e-10 }),
        "spin marginal of the bond-then-spin sweep vs the cluster sampler, one edge"),
    target!("sw-check.path3-marginal", "sw-check", "A8", Structural,
        Some(Le { bound: 0.0, tol: 1e-10 }),
        "the same equivalence on the three-site path"),
    target!("pt-check.composite-direct", "pt-check", "A8", Structural,
        Some(Le { bound: 0.0, tol: 1e-10 }),
        "replica-exchange sweep vs its direct enumeration, two levels"),
    target!("pt-check.three-level", "pt-check", "A8", Structural,
        Some(Le { bound: 0.0, tol: 1e-10 }),
        "the same equivalence with three temperature levels"),
    target!("pmmh-check.stationarity", "pmmh-check", "A8", Structural,
        Some(Le { bound: 0.0, tol: 1e-12 }),
        "stationarity residual of the pseudo-marginal chain for its extended target"),
    target!("pmmh-check.x-marginal", "pmmh-check", "A8", Structural,
        Some(Le { bound: 0.0, tol: 1e-12 }),
        "largest deviation of the extended target's X-marginal from the averaged law π_G"),
    // random-batteries: violation counts of the randomized theorem suites.
    target!("random-batteries.gamma-improvement", "random-batteries", "A7", Structural,
        Some(Le { bound: 0.0, tol: 0.0 }),
        "violations of γ(P_da) ≥ γ(P) − 1e-9 and γ((P_la)_ra) ≥ γ(P_da) − 1e-9"),
    target!("random-batteries.pythagorean", "random-batteries", "A7", Structural,
        Some(Le { bound: 0.0, tol: 0.0 }),
        "KL and squared-HS decomposition residuals above 1e-8, both regimes"),
    target!("random-batteries.mixing-sandwich", "random-batteries", "A7", Structural,
        Some(Le { bound: 0.0, tol: 0.0 }),
        "mixing-time sandwich violations over ε ∈ {2⁻¹..2⁻¹⁰}, both regimes, three norms"),
    target!("random-batteries.cheeger", "random-batteries", "A7", Structural,
        Some(Le { bound: 0.0, tol: 0.0 }),
        "conductance drops under orbit or double averaging of nonnegative-definite chains"),
    target!("random-batteries.variance-reduction", "random-batteries", "A7", Structural,
        Some(Le { bound: 0.0, tol: 0.0 }),
        "predicted vs observed asymptotic-variance reduction apart by more than 1e-7"),
    target!("random-batteries.inheritance", "random-batteries", "A7", Structural,
        Some(Le { bound: 0.0, tol: 0.0 }),
        "stationarity/reversibility/trace/HS inheritance violations under averaging"),
];

/// Looks up a target by key. Panics on an unknown key: the table and its
/// callers are both static, so a miss is a typo caught by the test below.
#[track_caller]
pub fn spec(key: &str) -> &'static TargetSpec {
    TABLE
        .iter()
        .find(|t| t.key == key)
        .unwrap_or_else(|| panic!("no target named `{key}` in the constants table"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_unique_and_dotted_under_their_experiment() {
        let mut seen = std::collections::HashSet::new();
        for t in TABLE {
            assert!(seen.insert(t.key), "duplicate key {}", t.key);
            let prefix = format!("{}.", t.experiment);
            assert!(t.key.starts_with(&prefix), "{} not under {}", t.key, t.experiment);
            assert!(t.battery.starts_with('A'));
        }
    }

    #[test]
    fn margins_flip_sign_exactly_at_the_tolerance_edge() {
        let eq = Eq { expected: 1.0, tol: 0.1 };
        assert!(eq.pass(1.1) && eq.pass(0.9) && !eq.pass(1.11));
        let ge = Ge { bound: 0.25, tol: 1e-9 };
        assert!(ge.pass(0.25) && ge.pass(0.25 - 1e-10) && !ge.pass(0.2));
        let le = Le { bound: 0.0, tol: 1e-12 };
        assert!(le.pass(1e-13) && !le.pass(1e-11));
        let sign = Sign { positive: false };
        assert!(sign.pass(-0.3) && !sign.pass(0.0) && !sign.pass(f64::NAN));
    }
}
