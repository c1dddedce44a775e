//! π-weighted information geometry for kernels.
//!
//! The central quantity is the π-weighted Kullback–Leibler divergence
//!
//! ```text
//!     D_π(P ‖ M) = Σ_{x,y} π(x) P(x,y) log(P(x,y) / M(x,y)),
//! ```
//!
//! with `0·log(0/a) := 0` and the value `+∞` as soon as `P` puts mass where
//! `M` puts none. Alongside it live the Hilbert–Schmidt norm on `L²(π)`, the
//! plain Frobenius distance, and the π-weighted trace.
//!
//! Group averaging is an orthogonal projection in this geometry:
//! [`pythagorean_check`] evaluates the three-term identity
//! `d(P, M) = d(P, avg) + d(avg, M)` for a supplied average and comparison
//! kernel `M`, after *verifying* the hypotheses that make it a theorem — the
//! average really is the claimed average of `P`, the averaging fixes it, and
//! `M` lies in the matching invariance class. The identity holds for KL and
//! squared-HS in both the orbit-constant-π regime and the state-dependent
//! one, and for squared-Frobenius only in the former; the check reports the
//! residual rather than asserting, because the Frobenius failure is a real
//! phenomenon, not a bug.
//!
//! The distribution-level utilities ([`pi_g`], [`kl_dist`],
//! [`required_sample_size`]) quantify how much of a target distribution
//! survives group symmetrization and what sample size an importance sampler
//! built on a proposal must pay for the mismatch.

use crate::averaging::{double_average, sd_average, special_average, AverageKind, Side};
use crate::error::Error;
use crate::group::FiniteGroup;
use crate::kernel::{self, MarkovKernel};
use crate::space::Distribution;
use crate::tol;
use crate::Result;

/// π-weighted KL divergence of `P` from `M`.
///
/// Returns `+∞` when absolute continuity fails (some `P(x,y) > 0` with
/// `M(x,y) = 0`); that is a value, not an error. Rows with `π(x) = 0` do not
/// contribute.
pub fn kl_pi(p: &MarkovKernel, m: &MarkovKernel, pi: &Distribution) -> Result<f64> {
    let n = p.n();
    if m.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.n() });
    }
    if pi.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: pi.n() });
    }
    let mut total = 0.0;
    for x in 0..n {
        let w = pi.get(x);
        if w <= 0.0 {
            continue;
        }
        for y in 0..n {
            let a = p.entry(x, y);
            if a <= 0.0 {
                continue;
            }
            let b = m.entry(x, y);
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += w * a * (a / b).ln();
        }
    }
    Ok(total.max(0.0))
}

/// KL divergence between two distributions, `Σ π(x) log(π(x)/π₀(x))`, with
/// the same zero conventions as [`kl_pi`].
pub fn kl_dist(pi: &Distribution, pi0: &Distribution) -> Result<f64> {
    if pi0.n() != pi.n() {
        return Err(Error::DimensionMismatch { expected: pi.n(), got: pi0.n() });
    }
    let mut total = 0.0;
    for x in 0..pi.n() {
        let a = pi.get(x);
        if a <= 0.0 {
            continue;
        }
        let b = pi0.get(x);
        if b <= 0.0 {
            return Ok(f64::INFINITY);
        }
        total += a * (a / b).ln();
    }
    Ok(total.max(0.0))
}

/// Importance-sampling cost of using proposal `π₀` for target `π`:
/// `exp(D_KL(π ‖ π₀))`, the sample size at which the approximation starts to
/// be adequate. `+∞` when the proposal misses part of the support.
pub fn required_sample_size(pi: &Distribution, pi0: &Distribution) -> Result<f64> {
    Ok(kl_dist(pi, pi0)?.exp())
}

/// The group-symmetrized distribution `π_G(x) = |G|⁻¹ Σ_g π(g·x)` — the
/// closest G-invariant distribution to `π` in KL divergence.
pub fn pi_g(pi: &Distribution, group: &FiniteGroup) -> Result<Distribution> {
    if group.space_size() != pi.n() {
        return Err(Error::DimensionMismatch { expected: pi.n(), got: group.space_size() });
    }
    let k = group.order() as f64;
    let values: Vec<f64> = (0..pi.n())
        .map(|x| group.elements().iter().map(|g| pi.get(g.apply(x))).sum::<f64>() / k)
        .collect();
    Distribution::from_unnormalized(values)
}

/// Hilbert–Schmidt norm of `P` as an operator on `L²(π)`:
/// `‖P‖²_HS = Σ_{x,y} π(x) P(x,y)² / π(y)`.
///
/// # Errors
///
/// π must be strictly positive (a zero-mass state makes the weighted norm
/// meaningless).
pub fn hs_norm(p: &MarkovKernel, pi: &Distribution) -> Result<f64> {
    hs_accum(p, None, pi)
}

/// Hilbert–Schmidt distance `‖P − M‖_HS` on `L²(π)`.
pub fn hs_dist(p: &MarkovKernel, m: &MarkovKernel, pi: &Distribution) -> Result<f64> {
    if m.n() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: m.n() });
    }
    hs_accum(p, Some(m), pi)
}

fn hs_accum(p: &MarkovKernel, m: Option<&MarkovKernel>, pi: &Distribution) -> Result<f64> {
    let n = p.n();
    if pi.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: pi.n() });
    }
    pi.require_positive()?;
    let mut total = 0.0;
    for x in 0..n {
        for y in 0..n {
            let d = p.entry(x, y) - m.map_or(0.0, |m| m.entry(x, y));
            total += pi.get(x) * d * d / pi.get(y);
        }
    }
    Ok(total.sqrt())
}

/// Entrywise Euclidean distance `‖P − M‖_F = √(Σ (P−M)²)`.
pub fn frob_dist(p: &MarkovKernel, m: &MarkovKernel) -> Result<f64> {
    if m.n() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: m.n() });
    }
    let total: f64 = (0..p.n())
        .flat_map(|x| (0..p.n()).map(move |y| (x, y)))
        .map(|(x, y)| (p.entry(x, y) - m.entry(x, y)).powi(2))
        .sum();
    Ok(total.sqrt())
}

/// Trace of the kernel. The π-weighting that defines the trace on `L²(π)`
/// cancels in finite dimension — the sum is basis-independent — so this is
/// the plain diagonal sum.
pub fn trace_pi(p: &MarkovKernel) -> f64 {
    (0..p.n()).map(|x| p.entry(x, x)).sum()
}

/// KL divergence from `P` to its conjugation average — zero exactly when `P`
/// is already invariant under conjugation by the group, hence a distance to
/// the isotropic kernels.
///
/// # Errors
///
/// π must be constant on the group's orbits.
pub fn distance_to_isotropy(
    p: &MarkovKernel,
    group: &FiniteGroup,
    pi: &Distribution,
) -> Result<f64> {
    let overline = special_average(p, group, &AverageKind::Orbit, pi)?;
    kl_pi(p, &overline, pi)
}

/// Which divergence a [`pythagorean_check`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceMetric {
    /// π-weighted KL divergence.
    Kl,
    /// Squared Hilbert–Schmidt distance on `L²(π)`.
    SquaredHs,
    /// Squared Frobenius distance.
    SquaredFrobenius,
}

/// Result of a three-term projection identity evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PythagoreanCheck {
    /// `d(P, M)`.
    pub lhs: f64,
    /// `d(P, avg)`.
    pub rhs_near: f64,
    /// `d(avg, M)`.
    pub rhs_far: f64,
    /// `lhs − (rhs_near + rhs_far)`; zero up to rounding when the identity
    /// holds, either sign when it genuinely fails (squared-Frobenius with
    /// orbit-varying π).
    pub residual: f64,
    pub metric: DivergenceMetric,
    /// The averaging whose invariance class `M` was verified against.
    pub kind: AverageKind,
}

/// Largest violation of `M(g·x, y) = M(x, y)` over the group — membership in
/// the left-invariant class, which has this entrywise form for every π.
fn left_class_deviation(m: &MarkovKernel, group: &FiniteGroup) -> f64 {
    let n = m.n();
    let mut worst = 0.0f64;
    for g in group.elements() {
        for x in 0..n {
            for y in 0..n {
                worst = worst.max((m.entry(g.apply(x), y) - m.entry(x, y)).abs());
            }
        }
    }
    worst
}

/// Largest violation of `M(x, h·y) = [π(h·y)/π(y)]·M(x, y)` — the
/// right-invariant class; the ratio collapses to 1 when π is orbit-constant.
fn right_class_deviation(m: &MarkovKernel, group: &FiniteGroup, pi: &Distribution) -> f64 {
    let n = m.n();
    let mut worst = 0.0f64;
    for h in group.elements() {
        for x in 0..n {
            for y in 0..n {
                let hy = h.apply(y);
                let scaled = pi.get(hy) / pi.get(y) * m.entry(x, y);
                worst = worst.max((m.entry(x, hy) - scaled).abs());
            }
        }
    }
    worst
}

fn class_deviation(
    m: &MarkovKernel,
    group: &FiniteGroup,
    pi: &Distribution,
    kind: &AverageKind,
) -> Result<f64> {
    let n = m.n();
    let dev = match kind {
        AverageKind::Orbit => {
            let mut worst = 0.0f64;
            for g in group.elements() {
                for x in 0..n {
                    for y in 0..n {
                        worst = worst
                            .max((m.entry(g.apply(x), g.apply(y)) - m.entry(x, y)).abs());
                    }
                }
            }
            worst
        }
        AverageKind::Twisted => {
            let mut worst = 0.0f64;
            for i in 0..group.order() {
                let g = group.elem(i);
                let g_inv = group.elem(group.inverse_index(i));
                for x in 0..n {
                    for y in 0..n {
                        worst = worst
                            .max((m.entry(g.apply(x), g_inv.apply(y)) - m.entry(x, y)).abs());
                    }
                }
            }
            worst
        }
        AverageKind::Left => left_class_deviation(m, group),
        AverageKind::Right => right_class_deviation(m, group, pi),
        AverageKind::Double => {
            left_class_deviation(m, group).max(right_class_deviation(m, group, pi))
        }
        AverageKind::General(nu) => {
            double_average(m, group.elements(), nu)?.max_abs_diff(m)
        }
    };
    Ok(dev)
}

/// Evaluates `d(P, M) = d(P, avg) + d(avg, M)` after verifying that the
/// hypotheses making it an identity actually hold:
///
/// * `avg` matches the `kind` average of `P` (computed here, compared within
///   1e-10) — for orbit-constant π the group average, otherwise the
///   state-dependent `Q`-composition, which additionally demands `P`
///   π-stationary;
/// * re-averaging fixes `avg` — automatic for the one- and two-sided kinds,
///   a real restriction for `Twisted` (non-Abelian groups fail) and
///   `General` measures;
/// * `M` lies in the invariance class matching `kind`, within 1e-10, and is
///   additionally π-stationary in the state-dependent regime.
///
/// A violated hypothesis is reported as [`Error::HypothesisViolated`] so it
/// cannot be mistaken for a failure of the identity itself. Infinite KL
/// terms yield [`Error::Inconclusive`]. The residual is *reported, not
/// asserted*: squared-Frobenius genuinely breaks under orbit-varying π.
pub fn pythagorean_check(
    p: &MarkovKernel,
    m: &MarkovKernel,
    avg: &MarkovKernel,
    group: &FiniteGroup,
    pi: &Distribution,
    metric: DivergenceMetric,
    kind: &AverageKind,
) -> Result<PythagoreanCheck> {
    let n = p.n();
    for (got, what) in [(m.n(), "comparison"), (avg.n(), "average")] {
        if got != n {
            let _ = what;
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    if group.space_size() != n || pi.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: group.space_size() });
    }
    pi.require_positive()?;

    let invariant = group.is_pi_invariant(pi);
    let reaverage = |q: &MarkovKernel| -> Result<MarkovKernel> {
        if invariant {
            special_average(q, group, kind, pi)
        } else {
            let side = match kind {
                AverageKind::Left => Side::Left,
                AverageKind::Right => Side::Right,
                AverageKind::Double => Side::Both,
                _ => {
                    return Err(Error::NotGroupInvariant {
                        deviation: group.invariance_deviation(pi),
                    })
                }
            };
            sd_average(q, group, pi, side)
        }
    };

    let expected = reaverage(p)?;
    let mismatch = avg.max_abs_diff(&expected);
    if mismatch > tol::STOCHASTIC {
        return Err(Error::HypothesisViolated(format!(
            "supplied average differs from the {kind:?} average of P by {mismatch:.3e}"
        )));
    }
    let refixed = reaverage(&expected)?.max_abs_diff(&expected);
    if refixed > tol::STOCHASTIC {
        return Err(Error::HypothesisViolated(format!(
            "the {kind:?} average is not fixed by re-averaging (moves by {refixed:.3e}); \
             the projection identity has no target"
        )));
    }
    let class_dev = class_deviation(m, group, pi, kind)?;
    if class_dev > tol::STOCHASTIC {
        return Err(Error::HypothesisViolated(format!(
            "comparison kernel lies outside the invariance class of {kind:?} \
             (deviation {class_dev:.3e})"
        )));
    }
    if !invariant {
        let residual = kernel::stationarity_residual(m, pi)?;
        if residual > tol::STOCHASTIC {
            return Err(Error::HypothesisViolated(format!(
                "state-dependent identities need a π-stationary comparison kernel \
                 (residual {residual:.3e})"
            )));
        }
    }

    let (lhs, rhs_near, rhs_far) = match metric {
        DivergenceMetric::Kl => {
            let lhs = kl_pi(p, m, pi)?;
            let near = kl_pi(p, avg, pi)?;
            let far = kl_pi(avg, m, pi)?;
            if !(lhs.is_finite() && near.is_finite() && far.is_finite()) {
                return Err(Error::Inconclusive(
                    "infinite KL term: absolute continuity fails somewhere in the triple"
                        .into(),
                ));
            }
            (lhs, near, far)
        }
        DivergenceMetric::SquaredHs => (
            hs_dist(p, m, pi)?.powi(2),
            hs_dist(p, avg, pi)?.powi(2),
            hs_dist(avg, m, pi)?.powi(2),
        ),
        DivergenceMetric::SquaredFrobenius => (
            frob_dist(p, m)?.powi(2),
            frob_dist(p, avg)?.powi(2),
            frob_dist(avg, m)?.powi(2),
        ),
    };
    Ok(PythagoreanCheck {
        lhs,
        rhs_near,
        rhs_far,
        residual: lhs - (rhs_near + rhs_far),
        metric,
        kind: kind.clone(),
    })
}
