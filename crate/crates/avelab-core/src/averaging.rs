//! Group-induced averages of Markov kernels.
//!
//! The central construction is the double average
//!
//! ```text
//!     P_da(G, ν) = Σ_{(g,h)} ν(g,h) · U_g P U_h ,
//! ```
//!
//! a ν-weighted mixture of `P` pre- and post-composed with deterministic
//! permutation moves. Entrywise, `(U_g P U_h)(x, y) = P(g·x, h⁻¹·y)`, so the
//! whole average costs `O(|atoms| · n²)` — no matrix products are formed.
//!
//! Five choices of ν recur often enough to deserve names ([`AverageKind`]):
//! the orbit average `Σ_g U_g P U_{g⁻¹} / |G|`, its twisted sibling
//! `Σ_g U_g P U_g / |G|`, the one-sided left (`Σ_g U_g P / |G|`) and right
//! (`Σ_g P U_g / |G|`) averages, and the independent double average obtained
//! by drawing both coordinates uniformly. All five preserve stationarity of a
//! `π`-stationary `P` **provided π is constant on group orbits**; that
//! precondition is checked by [`special_average`] and failure is a loud error.
//!
//! When π is *not* constant on orbits, the sanctioned substitute is the
//! state-dependent projector [`state_dependent_q`]:
//!
//! ```text
//!     Q(x, y) = Σ_{g : g·x = y} π(y) / Z(x),    Z(x) = Σ_g π(g·x),
//! ```
//!
//! which jumps within the orbit of `x` proportionally to the target mass.
//! `Q` is π-reversible, idempotent, and acts on functions as the
//! `⟨·,·⟩_π`-orthogonal projector onto the subspace of orbit-constant
//! functions. [`sd_average`] forms `QP`, `PQ`, and `QPQ`, which inherit
//! π-stationarity from `P` with no invariance assumption at all.
//!
//! [`metropolis_average_kernel`] lifts the same idea to the product space
//! `X × G`, where a move of the group coordinate is proposed uniformly and
//! accepted with the usual ratio — useful when `Z(x)` is too expensive to
//! normalize explicitly.

use crate::error::Error;
use crate::group::{pair_measure, FiniteGroup, PairMeasure, PairMeasureKind, Perm};
use crate::kernel::{self, MarkovKernel};
use crate::space::Distribution;
use crate::tol;
use crate::Result;
use nalgebra::DMatrix;

/// The named averaging schemes, plus an escape hatch for arbitrary pair
/// measures.
///
/// Each named variant fixes the pair measure ν over `G × G`:
///
/// | variant   | ν                              | result                 |
/// |-----------|--------------------------------|------------------------|
/// | `Orbit`   | `(g, g⁻¹)` for uniform `g`     | `Σ_g U_g P U_{g⁻¹}/|G|`|
/// | `Twisted` | `(g, g)` for uniform `g`       | `Σ_g U_g P U_g/|G|`    |
/// | `Left`    | `(g, e)` for uniform `g`       | `Σ_g U_g P/|G|`        |
/// | `Right`   | `(e, g)` for uniform `g`       | `Σ_g P U_g/|G|`        |
/// | `Double`  | independent uniform `(g, h)`   | left then right        |
/// | `General` | caller-supplied                | anything               |
#[derive(Debug, Clone, PartialEq)]
pub enum AverageKind {
    /// Conjugation average; preserves reversibility and the trace.
    Orbit,
    /// Same-element average `Σ_g U_g P U_g / |G|`.
    Twisted,
    /// Pre-composition average; fixed by every `U_g` on the left.
    Left,
    /// Post-composition average; fixed by every `U_g` on the right.
    Right,
    /// Independent double average: equals `Left` followed by `Right`
    /// (in either order), and dominates every other choice of ν in
    /// multiplicative spectral gap.
    Double,
    /// Arbitrary pair measure whose atoms index the group's elements.
    General(PairMeasure),
}

/// Forms `Σ w · U_g P U_h` over the atoms of `nu`, whose indices refer to
/// entries of `perms`.
///
/// This is the raw construction: no stationarity or invariance conditions are
/// assumed or checked, and `perms` need not be closed under composition (the
/// block-reversal scheme averages over a handful of involutions that generate
/// a group far too large to enumerate). Use [`special_average`] for the named
/// schemes with their preconditions enforced.
///
/// # Errors
///
/// Rejects permutations whose size differs from the kernel's, and pair
/// measures whose atoms index past the end of `perms`.
pub fn double_average(
    p: &MarkovKernel,
    perms: &[Perm],
    nu: &PairMeasure,
) -> Result<MarkovKernel> {
    let n = p.n();
    for g in perms {
        if g.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.n() });
        }
    }
    if nu.max_index() >= perms.len() {
        return Err(Error::InvalidPairMeasure(format!(
            "atom index {} out of range for {} permutations",
            nu.max_index(),
            perms.len()
        )));
    }

    // Precompute h⁻¹ per atom so each entry is a direct lookup:
    // (U_g P U_h)(x, y) = P(g·x, h⁻¹·y).
    let prepared: Vec<(&Perm, Perm, f64)> = nu
        .atoms()
        .iter()
        .map(|&(gi, hi, w)| (&perms[gi], perms[hi].inverse(), w))
        .collect();

    let mut m = DMatrix::zeros(n, n);
    for x in 0..n {
        for (g, h_inv, w) in &prepared {
            let gx = g.apply(x);
            for y in 0..n {
                m[(x, y)] += w * p.entry(gx, h_inv.apply(y));
            }
        }
    }
    MarkovKernel::new(m)
}

/// One of the five named averages of `P` under `group`, with the stationarity
/// precondition enforced.
///
/// The named schemes only make sense when π puts equal mass on every state of
/// each group orbit: otherwise the average is not π-stationary and every
/// downstream diagnostic would silently compare chains with different
/// equilibria. A non-invariant π is therefore an error — the state-dependent
/// constructions ([`sd_average`]) handle that regime.
///
/// When `P` is itself π-stationary, the result carries `pi` as its verified
/// stationary distribution.
///
/// # Errors
///
/// [`Error::NotGroupInvariant`] when π is not constant on orbits; size
/// mismatches and invalid `General` measures as in [`double_average`].
pub fn special_average(
    p: &MarkovKernel,
    group: &FiniteGroup,
    kind: &AverageKind,
    pi: &Distribution,
) -> Result<MarkovKernel> {
    if group.space_size() != p.n() || pi.n() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: group.space_size().max(pi.n()) });
    }
    if !group.is_pi_invariant(pi) {
        return Err(Error::NotGroupInvariant { deviation: group.invariance_deviation(pi) });
    }
    let nu = match kind {
        AverageKind::Orbit => pair_measure(group, PairMeasureKind::Conjugation),
        AverageKind::Twisted => pair_measure(group, PairMeasureKind::Twisted),
        AverageKind::Left => pair_measure(group, PairMeasureKind::Left),
        AverageKind::Right => pair_measure(group, PairMeasureKind::Right),
        AverageKind::Double => pair_measure(group, PairMeasureKind::Product),
        AverageKind::General(nu) => nu.clone(),
    };
    let out = double_average(p, group.elements(), &nu)?;
    if kernel::is_stationary(p, pi)? {
        out.with_stationary(pi)
    } else {
        Ok(out)
    }
}

/// The state-dependent orbit projector `Q(x, y) = Σ_{g: g·x=y} π(y)/Z(x)`
/// with `Z(x) = Σ_g π(g·x)`.
///
/// From `x`, the chain draws `g` with probability `π(g·x)/Z(x)` and jumps to
/// `g·x`: a within-orbit move weighted by the target. The result is always
/// π-reversible and idempotent, and when π happens to be constant on orbits
/// it degenerates to the uniform orbit average `Σ_g U_g / |G|`.
///
/// The returned kernel carries `pi` as its verified stationary distribution
/// (with reversibility confirmed).
///
/// # Errors
///
/// π must be strictly positive — `Z(x)` may otherwise vanish.
pub fn state_dependent_q(group: &FiniteGroup, pi: &Distribution) -> Result<MarkovKernel> {
    pi.require_positive()?;
    let n = pi.n();
    if group.space_size() != n {
        return Err(Error::DimensionMismatch { expected: n, got: group.space_size() });
    }
    let mut m = DMatrix::zeros(n, n);
    for x in 0..n {
        let z: f64 = (0..group.order()).map(|gi| pi.get(group.elem(gi).apply(x))).sum();
        for gi in 0..group.order() {
            let y = group.elem(gi).apply(x);
            m[(x, y)] += pi.get(y) / z;
        }
    }
    MarkovKernel::new(m)?.with_stationary(pi)
}

/// Which side(s) of `P` the state-dependent projector multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `QP`: project, then move.
    Left,
    /// `PQ`: move, then project.
    Right,
    /// `QPQ`: project on both sides; reversible whenever `P` is.
    Both,
}

/// State-dependent one- and two-sided averages `QP`, `PQ`, `QPQ`.
///
/// These are the only averages of the state-dependent regime that are
/// guaranteed π-stationary, and they require no invariance of π whatsoever.
/// Entrywise,
///
/// ```text
///     QP(x,y)  = Σ_g P(g·x, y) π(g·x) / Z(x),
///     PQ(x,y)  = Σ_g P(x, g·y) π(y) / Z(y),
///     QPQ(x,y) = Σ_{g,h} [π(g·x)/Z(x)] · P(g·x, h·y) · [π(y)/Z(y)],
/// ```
///
/// which the matrix products reproduce exactly (`Z` is constant on orbits).
/// When π *is* constant on orbits, the three coincide with
/// [`special_average`] of kind `Left`, `Right`, and `Double`.
///
/// # Errors
///
/// `P` must be π-stationary — the point of the construction is to preserve
/// that — and π strictly positive.
pub fn sd_average(
    p: &MarkovKernel,
    group: &FiniteGroup,
    pi: &Distribution,
    side: Side,
) -> Result<MarkovKernel> {
    let residual = kernel::stationarity_residual(p, pi)?;
    if residual > tol::STOCHASTIC {
        return Err(Error::NotStationary { residual });
    }
    let q = state_dependent_q(group, pi)?;
    let out = match side {
        Side::Left => kernel::compose(&q, p)?,
        Side::Right => kernel::compose(p, &q)?,
        Side::Both => kernel::compose(&kernel::compose(&q, p)?, &q)?,
    };
    out.with_stationary(pi)
}

/// Metropolized averaging on the product space `X × G`.
///
/// States are pairs `(x, g)` flattened as `x·|G| + g`. The only move changes
/// the group coordinate: propose `g'` uniformly over `G`, accept with
/// probability `min{1, π(g'·x)/π(g·x)}`, rejecting onto the diagonal. The
/// invariant law is `π̃(x, g) = π(g·x)/|G|` (attached to the returned kernel,
/// reversibility verified), so the chain averages over the orbit of `x`
/// without ever computing the normalizer `Z(x)`.
///
/// # Errors
///
/// π must be strictly positive, and the product space must stay within the
/// dense-matrix comfort zone.
/// Largest product space `X × G` the extended-space constructions
/// materialize as a dense matrix.
pub const MAX_EXTENDED_STATES: usize = 4096;

pub fn metropolis_average_kernel(
    group: &FiniteGroup,
    pi: &Distribution,
) -> Result<MarkovKernel> {
    const MAX_EXTENDED: usize = MAX_EXTENDED_STATES;
    pi.require_positive()?;
    let n = pi.n();
    if group.space_size() != n {
        return Err(Error::DimensionMismatch { expected: n, got: group.space_size() });
    }
    let k = group.order();
    let size = n.checked_mul(k).filter(|&s| s <= MAX_EXTENDED).ok_or(Error::TooLarge {
        what: "product space X x G",
        size: n.saturating_mul(k),
        max: MAX_EXTENDED,
    })?;

    let mut m = DMatrix::zeros(size, size);
    let mut pi_ext = vec![0.0; size];
    for x in 0..n {
        for gi in 0..k {
            let row = x * k + gi;
            let mass_here = pi.get(group.elem(gi).apply(x));
            pi_ext[row] = mass_here / k as f64;
            let mut stay = 0.0;
            for gj in 0..k {
                if gj == gi {
                    stay += 1.0 / k as f64; // proposing the current g is a no-op
                    continue;
                }
                let accept = (pi.get(group.elem(gj).apply(x)) / mass_here).min(1.0);
                m[(row, x * k + gj)] = accept / k as f64;
                stay += (1.0 - accept) / k as f64;
            }
            m[(row, row)] += stay;
        }
    }
    let pi_tilde = Distribution::new(pi_ext)?;
    MarkovKernel::new(m)?.with_stationary(&pi_tilde)
}

/// Which of the averaging fixed-point classes a kernel belongs to, each
/// tested entrywise at `1e-10` over the supplied permutations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InvarianceFlags {
    /// `P = U_g P U_{g⁻¹}` for every listed `g` (conjugation-fixed; the class
    /// of every orbit average).
    pub conjugation: bool,
    /// `P = U_g P U_g` for every listed `g` (the twisted average's class when
    /// the group is Abelian).
    pub twisted: bool,
    /// `U_g P = P` for every listed `g` (left-fixed).
    pub left: bool,
    /// `P U_g = P` for every listed `g` (right-fixed).
    pub right: bool,
    /// `QP = P` for the state-dependent projector, when a π was supplied.
    pub fixed_by_q_left: Option<bool>,
    /// `PQ = P` for the state-dependent projector, when a π was supplied.
    pub fixed_by_q_right: Option<bool>,
    /// True when the test quantified over a bare generator list rather than a
    /// closed group, in which case membership is necessary but not certified
    /// for the generated group.
    pub generators_only: bool,
}

/// Classifies `P` against the fixed-point sets of a closed group, including
/// the state-dependent classes when `pi` is supplied.
pub fn invariance_class(
    p: &MarkovKernel,
    group: &FiniteGroup,
    pi: Option<&Distribution>,
) -> Result<InvarianceFlags> {
    let mut flags = invariance_class_over(p, group.elements())?;
    flags.generators_only = false;
    if let Some(pi) = pi {
        let q = state_dependent_q(group, pi)?;
        let qp = kernel::compose(&q, p)?;
        let pq = kernel::compose(p, &q)?;
        flags.fixed_by_q_left = Some(qp.max_abs_diff(p) <= tol::STOCHASTIC);
        flags.fixed_by_q_right = Some(pq.max_abs_diff(p) <= tol::STOCHASTIC);
    }
    Ok(flags)
}

/// Classifies `P` against the fixed-point predicates quantified over a bare
/// permutation list (no closure is taken — the list may generate a group far
/// beyond enumeration). The result is marked [`InvarianceFlags::generators_only`].
pub fn invariance_class_over(p: &MarkovKernel, perms: &[Perm]) -> Result<InvarianceFlags> {
    let n = p.n();
    let mut conjugation = true;
    let mut twisted = true;
    let mut left = true;
    let mut right = true;
    for g in perms {
        if g.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.n() });
        }
        let g_inv = g.inverse();
        let mut d_conj: f64 = 0.0;
        let mut d_twist: f64 = 0.0;
        let mut d_left: f64 = 0.0;
        let mut d_right: f64 = 0.0;
        for x in 0..n {
            let gx = g.apply(x);
            for y in 0..n {
                let pxy = p.entry(x, y);
                // (U_g P U_h)(x,y) = P(g·x, h⁻¹·y) with h = g⁻¹, g, e, and
                // the right-only case P U_g (x,y) = P(x, g⁻¹·y).
                d_conj = d_conj.max((pxy - p.entry(gx, g.apply(y))).abs());
                d_twist = d_twist.max((pxy - p.entry(gx, g_inv.apply(y))).abs());
                d_left = d_left.max((pxy - p.entry(gx, y)).abs());
                d_right = d_right.max((pxy - p.entry(x, g_inv.apply(y))).abs());
            }
        }
        conjugation &= d_conj <= tol::STOCHASTIC;
        twisted &= d_twist <= tol::STOCHASTIC;
        left &= d_left <= tol::STOCHASTIC;
        right &= d_right <= tol::STOCHASTIC;
    }
    Ok(InvarianceFlags {
        conjugation,
        twisted,
        left,
        right,
        fixed_by_q_left: None,
        fixed_by_q_right: None,
        generators_only: true,
    })
}
