//! π-weighted spectral diagnostics.
//!
//! Everything here works in the Euclidean frame obtained by conjugating with
//! `diag(√π)`: the map `f ↦ √π ⊙ f` is an isometry from `L²(π)` onto plain
//! Euclidean space that sends a kernel `P` to `S = D^{1/2} P D^{-1/2}` and its
//! π-adjoint to `Sᵀ`. Spectral questions about `P` become *symmetric* matrix
//! problems about `S`, so ordinary symmetric eigensolvers and SVDs apply.
//!
//! Two gaps are reported for a π-stationary kernel:
//!
//! * the additive gap `λ`, the second-smallest eigenvalue of
//!   `I − (S + Sᵀ)/2` — the classical right spectral gap of the additive
//!   reversiblization;
//! * the multiplicative gap `γ = 1 − σ_max(S − ssᵀ)` with `s = √π`, i.e. one
//!   minus the operator norm of `P` on mean-zero functions. For reversible
//!   chains `γ ≤ λ`; for non-reversible ones `γ` is the quantity that
//!   averaging provably never hurts.
//!
//! The subspace machinery ([`invariant_basis`], [`gap_eigenspace`]) produces
//! π-orthonormal bases for the orbit-constant functions `V` (and its centered
//! part `V'`) and for the eigenspaces attached to `λ` and `γ`. Those feed the
//! two theorem bounds: [`overline_gap_bound`] for the conjugation average and
//! [`gamma_bounds_la_ra`] for the one-sided averages, both expressed through
//! operator norms of projector products `‖𝐏_V 𝐏_W 𝐏_V‖`, which reduce to a
//! largest singular value of `BᵀC` for orthonormal basis matrices `B`, `C`.

use crate::error::Error;
use crate::group::{orbits_under, FiniteGroup, Perm};
use crate::kernel::{self, MarkovKernel};
use crate::space::{Distribution, ObsFunction};
use crate::tol;
use crate::Result;
use nalgebra::{DMatrix, DVector};

/// Additive and multiplicative gaps with their secondary eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// Right spectral gap: second-smallest eigenvalue of `I − (P+P*)/2`.
    pub lambda: f64,
    /// Third-smallest eigenvalue of the same operator (equals `lambda` when
    /// only two eigenvalues exist).
    pub lambda2: f64,
    /// Multiplicative gap `1 − ‖P − Π‖` in the π-weighted operator norm.
    pub gamma: f64,
    /// One minus the second singular value of `P − Π` (equals `gamma` when
    /// only one singular value exists).
    pub gamma2: f64,
    /// Spectrum of the additive reversiblization `(P+P*)/2`, descending from 1.
    pub eigenvalues: Vec<f64>,
    /// Singular values of `P − Π` in the weighted geometry, descending.
    pub singular_values: Vec<f64>,
}

/// Which subspace a basis spans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubspaceTag {
    /// Orbit-constant functions `V`.
    Invariant,
    /// Orbit-constant functions orthogonal to the constants, `V'`.
    InvariantCentered,
    /// π-orthocomplement of the orbit-constant functions, `V⊥`.
    InvariantComplement,
    /// Eigenspace of the additive gap `λ`.
    AdditiveGap,
    /// Left singular space at the top singular value of `P − Π`.
    MultiplicativeGap,
    /// The same for the adjoint `P*` (right singular space of `P − Π`).
    MultiplicativeGapAdjoint,
}

/// A π-orthonormal list of functions spanning one of the named subspaces.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    tag: SubspaceTag,
    vectors: Vec<ObsFunction>,
}

impl SubspaceBasis {
    pub fn tag(&self) -> SubspaceTag {
        self.tag
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[ObsFunction] {
        &self.vectors
    }

    /// Largest deviation of `⟨vᵢ, vⱼ⟩_π` from `δᵢⱼ`.
    pub fn orthonormality_residual(&self, pi: &Distribution) -> Result<f64> {
        let mut worst = 0.0f64;
        for (i, vi) in self.vectors.iter().enumerate() {
            for (j, vj) in self.vectors.iter().enumerate() {
                let ip = kernel::weighted_inner(vi, vj, pi)?;
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        Ok(worst)
    }
}

/// Eigenvalue-cluster width used to decide multiplicity of the gap
/// eigenvalue; the `_with_tol` variants accept other widths.
pub const CLUSTER_TOL: f64 = tol::EIGEN_CLUSTER;

/// Which gap's eigenspace [`gap_eigenspace`] extracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapSpace {
    /// Eigenspace of `I − (P+P*)/2` at the additive gap `λ`.
    Additive,
    /// Left singular space of `P − Π` at its top singular value (the
    /// eigenspace of the multiplicative gap of `P`).
    Multiplicative,
    /// Right singular space of `P − Π`: the multiplicative gap space of `P*`.
    MultiplicativeAdjoint,
}

pub(crate) fn sqrt_pi(pi: &Distribution) -> DVector<f64> {
    DVector::from_iterator(pi.n(), pi.iter().map(f64::sqrt))
}

/// `S = D^{1/2} P D^{-1/2}`, the Euclidean representative of `P` on `L²(π)`.
pub(crate) fn euclidean_rep(p: &MarkovKernel, pi: &Distribution) -> DMatrix<f64> {
    let n = p.n();
    let s = sqrt_pi(pi);
    DMatrix::from_fn(n, n, |x, y| s[x] * p.entry(x, y) / s[y])
}

/// `S − ssᵀ`: the representative of `P − Π`, which kills the constant
/// direction on both sides once `P` is π-stationary.
fn deflated_rep(p: &MarkovKernel, pi: &Distribution) -> DMatrix<f64> {
    let s = sqrt_pi(pi);
    euclidean_rep(p, pi) - &s * s.transpose()
}

fn sorted_sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let se = m.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..se.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let vals = idx.iter().map(|&i| se.eigenvalues[i]).collect();
    let vecs = idx.iter().map(|&i| se.eigenvectors.column(i).into_owned()).collect();
    (vals, vecs)
}

/// Singular values descending, with left/right singular vectors whose leading
/// clusters span the correct subspaces (sides are not sign-paired).
///
/// Deliberately routed through symmetric eigendecompositions of the two Gram
/// matrices `MᵀM` and `MMᵀ` rather than the general SVD: the bidiagonal SVD
/// in the linear-algebra backend returns visibly wrong top values on some
/// low-rank representatives (a symmetric rank-one matrix with three equal
/// rows came back 2.5% high, inverting a provable gap comparison — see the
/// regression test), while the tridiagonal symmetric solver stays accurate.
/// Squaring costs half the digits near zero, which the ~1e-9 gap tolerances
/// absorb.
fn sorted_svd(m: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let (mut sq, mut right) = sorted_sym_eigen(&(m.transpose() * m));
    let (_, mut left) = sorted_sym_eigen(&(m * m.transpose()));
    sq.reverse();
    right.reverse();
    left.reverse();
    let vals = sq.into_iter().map(|v| v.max(0.0).sqrt()).collect();
    (vals, left, right)
}

/// Euclidean modified Gram–Schmidt with re-orthogonalization; drops vectors
/// whose residual norm falls below `drop_tol` (rank deficiencies).
pub(crate) fn orthonormalize(mut cols: Vec<DVector<f64>>, drop_tol: f64) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(cols.len());
    for col in cols.iter_mut() {
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(col);
                *col -= q * c;
            }
        }
        let norm = col.norm();
        if norm > drop_tol {
            out.push(&*col / norm);
        }
    }
    out
}

fn to_functions(cols: Vec<DVector<f64>>, pi: &Distribution, tag: SubspaceTag) -> SubspaceBasis {
    let s = sqrt_pi(pi);
    let vectors = cols
        .into_iter()
        .map(|u| {
            let f = DVector::from_fn(u.len(), |x, _| u[x] / s[x]);
            ObsFunction::from_vector(f).expect("finite by construction")
        })
        .collect();
    SubspaceBasis { tag, vectors }
}

fn check_spectral_inputs(p: &MarkovKernel, pi: &Distribution) -> Result<()> {
    pi.require_positive()?;
    if p.n() < 2 {
        return Err(Error::InvalidParameter(
            "spectral diagnostics need at least two states".into(),
        ));
    }
    let residual = kernel::stationarity_residual(p, pi)?;
    if residual > tol::STOCHASTIC {
        return Err(Error::NotStationary { residual });
    }
    Ok(())
}

/// Computes both gaps and the full symmetrized spectra of `P`.
///
/// # Errors
///
/// `P` must be π-stationary (the adjoint, and hence both gaps, are defined
/// through π) and π strictly positive.
pub fn spectral_report(p: &MarkovKernel, pi: &Distribution) -> Result<SpectralReport> {
    check_spectral_inputs(p, pi)?;
    let n = p.n();
    let srep = euclidean_rep(p, pi);
    let additive = DMatrix::from_fn(n, n, |x, y| {
        let sym = 0.5 * (srep[(x, y)] + srep[(y, x)]);
        if x == y {
            1.0 - sym
        } else {
            -sym
        }
    });
    let (evals, _) = sorted_sym_eigen(&additive);
    let lambda = evals[1].clamp(0.0, 2.0);
    let lambda2 = if n > 2 { evals[2].clamp(0.0, 2.0) } else { lambda };

    let (svals, _, _) = sorted_svd(&deflated_rep(p, pi));
    let gamma = (1.0 - svals[0]).clamp(0.0, 1.0);
    let gamma2 = if svals.len() > 1 {
        (1.0 - svals[1]).clamp(0.0, 1.0)
    } else {
        gamma
    };

    Ok(SpectralReport {
        lambda,
        lambda2,
        gamma,
        gamma2,
        eigenvalues: evals.iter().map(|a| 1.0 - a).collect(),
        singular_values: svals,
    })
}

/// Euclidean orthonormal basis of the image `D^{1/2}V` of the orbit-constant
/// subspace: one column per orbit, carrying `√π(x)/√π(orbit)`.
pub(crate) fn euclid_invariant(perms: &[Perm], pi: &Distribution) -> Vec<DVector<f64>> {
    let n = pi.n();
    let s = sqrt_pi(pi);
    orbits_under(perms, n)
        .iter()
        .map(|orbit| {
            let mass: f64 = orbit.iter().map(|&x| pi.get(x)).sum();
            let mut col = DVector::zeros(n);
            for &x in orbit {
                col[x] = s[x] / mass.sqrt();
            }
            col
        })
        .collect()
}

/// Euclidean orthonormal basis of the orthocomplement of `span(cols)`.
pub(crate) fn euclid_complement(cols: &[DVector<f64>], n: usize) -> Vec<DVector<f64>> {
    let mut proj = DMatrix::identity(n, n);
    for b in cols {
        proj -= b * b.transpose();
    }
    let (vals, vecs) = sorted_sym_eigen(&proj);
    vals.iter()
        .zip(vecs)
        .filter(|(v, _)| **v > 0.5)
        .map(|(_, u)| u)
        .collect()
}

/// π-orthonormal bases of `V` (functions fixed by every listed permutation)
/// and of its centered part `V'`.
///
/// Fixed functions of a generator list coincide with those of the group it
/// generates — both are exactly the functions constant on the joint orbits —
/// so no closure is taken and huge generated groups cost nothing here.
pub fn invariant_basis(
    perms: &[Perm],
    pi: &Distribution,
) -> Result<(SubspaceBasis, SubspaceBasis)> {
    pi.require_positive()?;
    let n = pi.n();
    for g in perms {
        if g.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.n() });
        }
    }
    let v_cols = euclid_invariant(perms, pi);
    let s = sqrt_pi(pi);
    // Center each orbit column against the constants (Euclidean image: s)
    // and drop one redundant direction; what survives spans D^{1/2}V'.
    let centered: Vec<DVector<f64>> = v_cols
        .iter()
        .take(v_cols.len().saturating_sub(1))
        .map(|b| b - &s * s.dot(b))
        .collect();
    let vprime_cols = orthonormalize(centered, 1e-9);
    Ok((
        to_functions(v_cols, pi, SubspaceTag::Invariant),
        to_functions(vprime_cols, pi, SubspaceTag::InvariantCentered),
    ))
}

/// π-orthonormal basis of `V⊥`, the orthocomplement of the orbit-constant
/// functions.
pub fn invariant_complement_basis(perms: &[Perm], pi: &Distribution) -> Result<SubspaceBasis> {
    pi.require_positive()?;
    let n = pi.n();
    for g in perms {
        if g.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.n() });
        }
    }
    let v_cols = euclid_invariant(perms, pi);
    let cols = euclid_complement(&v_cols, n);
    Ok(to_functions(cols, pi, SubspaceTag::InvariantComplement))
}

/// Extracts the π-orthonormal eigenbasis attached to the requested gap, with
/// the default cluster width [`CLUSTER_TOL`].
pub fn gap_eigenspace(
    p: &MarkovKernel,
    pi: &Distribution,
    which: GapSpace,
) -> Result<SubspaceBasis> {
    gap_eigenspace_with_tol(p, pi, which, CLUSTER_TOL)
}

/// [`gap_eigenspace`] with an explicit eigenvalue-cluster width.
///
/// Eigenvalues within `cluster_tol` of the gap eigenvalue are treated as one
/// multiple eigenvalue and their eigenvectors returned together. The constant
/// direction is always projected out, so in the degenerate case `λ = 0` (or
/// `γ = 0` with a defective deflation) the basis still spans only mean-zero
/// functions.
pub fn gap_eigenspace_with_tol(
    p: &MarkovKernel,
    pi: &Distribution,
    which: GapSpace,
    cluster_tol: f64,
) -> Result<SubspaceBasis> {
    check_spectral_inputs(p, pi)?;
    let n = p.n();
    let s = sqrt_pi(pi);
    let (tag, mut cluster): (SubspaceTag, Vec<DVector<f64>>) = match which {
        GapSpace::Additive => {
            let srep = euclidean_rep(p, pi);
            let additive = DMatrix::from_fn(n, n, |x, y| {
                let sym = 0.5 * (srep[(x, y)] + srep[(y, x)]);
                if x == y {
                    1.0 - sym
                } else {
                    -sym
                }
            });
            let (vals, vecs) = sorted_sym_eigen(&additive);
            let gap = vals[1];
            let cols = vals
                .iter()
                .zip(vecs)
                .skip(1)
                .filter(|(v, _)| (**v - gap).abs() <= cluster_tol)
                .map(|(_, u)| u)
                .collect();
            (SubspaceTag::AdditiveGap, cols)
        }
        GapSpace::Multiplicative | GapSpace::MultiplicativeAdjoint => {
            let (vals, left, right) = sorted_svd(&deflated_rep(p, pi));
            let top = vals[0];
            let source = if which == GapSpace::Multiplicative { left } else { right };
            let cols = vals
                .iter()
                .zip(source)
                .filter(|(v, _)| (top - **v).abs() <= cluster_tol)
                .map(|(_, u)| u)
                .collect();
            let tag = if which == GapSpace::Multiplicative {
                SubspaceTag::MultiplicativeGap
            } else {
                SubspaceTag::MultiplicativeGapAdjoint
            };
            (tag, cols)
        }
    };
    // Insurance against degenerate clusters that brush the constant
    // direction: project out s and re-orthonormalize.
    for col in cluster.iter_mut() {
        let c = s.dot(col);
        *col -= &s * c;
    }
    let cols = orthonormalize(cluster, 1e-7);
    Ok(to_functions(cols, pi, tag))
}

/// `‖𝐏_B 𝐏_C 𝐏_B‖_{2→2} = σ_max(BᵀC)²` for Euclidean-orthonormal bases,
/// computed as the top eigenvalue of the Gram matrix (same backend caveat as
/// [`sorted_svd`]).
fn projector_overlap(b: &[DVector<f64>], c: &[DVector<f64>]) -> f64 {
    if b.is_empty() || c.is_empty() {
        return 0.0;
    }
    let m = DMatrix::from_fn(b.len(), c.len(), |i, j| b[i].dot(&c[j]));
    let gram = m.transpose() * &m;
    gram.symmetric_eigen().eigenvalues.max().clamp(0.0, 1.0)
}

/// The conjugation-average lower bound and its ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlineBoundReport {
    /// `min{a·λ + (1−a)·λ₂, b·λ + (1−b)·λ₂}`, a guaranteed lower bound on the
    /// additive gap of the orbit average.
    pub bound: f64,
    pub lambda: f64,
    pub lambda2: f64,
    /// `a = ‖𝐏_V 𝐏_W 𝐏_V‖`.
    pub overlap_invariant: f64,
    /// `b = ‖𝐏_{V⊥} 𝐏_W 𝐏_{V⊥}‖`.
    pub overlap_complement: f64,
    /// Dimension of the gap eigenspace `W`.
    pub gap_dim: usize,
    /// `W` meets `V` up to numerical rank (`a ≈ 1`); strict improvement is
    /// not certified.
    pub gap_meets_invariant: bool,
    /// `W` meets `V⊥` up to numerical rank (`b ≈ 1`).
    pub gap_meets_complement: bool,
}

/// Lower bound on the additive gap of the conjugation average:
///
/// ```text
///     λ(orbit average) ≥ min{ a·λ + (1−a)·λ₂ ,  b·λ + (1−b)·λ₂ } ≥ λ(P),
/// ```
///
/// with `a`, `b` the projector-product norms onto `V` and `V⊥` of the gap
/// eigenspace `W`. Strict improvement holds when `W` meets neither `V` nor
/// `V⊥`; the report flags the near-degenerate cases instead of asserting.
///
/// # Errors
///
/// π must be constant on the group's orbits and `P` π-stationary.
pub fn overline_gap_bound(
    p: &MarkovKernel,
    group: &FiniteGroup,
    pi: &Distribution,
) -> Result<OverlineBoundReport> {
    if group.space_size() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: group.space_size() });
    }
    if !group.is_pi_invariant(pi) {
        return Err(Error::NotGroupInvariant { deviation: group.invariance_deviation(pi) });
    }
    let report = spectral_report(p, pi)?;
    let w = gap_eigenspace(p, pi, GapSpace::Additive)?;
    let s = sqrt_pi(pi);
    let w_cols: Vec<DVector<f64>> = w
        .vectors()
        .iter()
        .map(|f| DVector::from_fn(p.n(), |x, _| s[x] * f.get(x)))
        .collect();
    let v_cols = euclid_invariant(group.elements(), pi);
    let vperp_cols = euclid_complement(&v_cols, p.n());
    let a = projector_overlap(&v_cols, &w_cols);
    let b = projector_overlap(&vperp_cols, &w_cols);
    let (lambda, lambda2) = (report.lambda, report.lambda2);
    let bound = (a * lambda + (1.0 - a) * lambda2).min(b * lambda + (1.0 - b) * lambda2);
    Ok(OverlineBoundReport {
        bound,
        lambda,
        lambda2,
        overlap_invariant: a,
        overlap_complement: b,
        gap_dim: w.dim(),
        gap_meets_invariant: a >= 1.0 - tol::EIGEN_CLUSTER,
        gap_meets_complement: b >= 1.0 - tol::EIGEN_CLUSTER,
    })
}

/// Lower bounds for the one-sided averages, with the projector norms that
/// produce them.
#[derive(Debug, Clone, PartialEq)]
pub struct OneSidedGammaBounds {
    /// `γ(left average) ≥ 1 − √(β(1−γ)² + (1−β)(1−γ₂)²)`.
    pub bound_la: f64,
    /// Same expression with `β'` for the right average.
    pub bound_ra: f64,
    /// `β = ‖𝐏_V 𝐏_{W̃(P)} 𝐏_V‖`.
    pub beta: f64,
    /// `β' = ‖𝐏_V 𝐏_{W̃(P*)} 𝐏_V‖`.
    pub beta_prime: f64,
    pub gamma: f64,
    pub gamma2: f64,
}

/// The one-sided multiplicative-gap bounds
///
/// ```text
///     γ(P_left)  ≥ 1 − √(β (1−γ)² + (1−β)(1−γ₂)²)  ≥ γ(P),
///     γ(P_right) ≥ 1 − √(β'(1−γ)² + (1−β')(1−γ₂)²) ≥ γ(P),
/// ```
///
/// where `β`, `β'` measure how much of the top singular space of `P − Π`
/// (resp. of its adjoint) lies inside the orbit-constant functions.
///
/// # Errors
///
/// π must be constant on the group's orbits and `P` π-stationary.
pub fn gamma_bounds_la_ra(
    p: &MarkovKernel,
    group: &FiniteGroup,
    pi: &Distribution,
) -> Result<OneSidedGammaBounds> {
    if group.space_size() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: group.space_size() });
    }
    if !group.is_pi_invariant(pi) {
        return Err(Error::NotGroupInvariant { deviation: group.invariance_deviation(pi) });
    }
    let report = spectral_report(p, pi)?;
    let s = sqrt_pi(pi);
    let v_cols = euclid_invariant(group.elements(), pi);
    let mut overlaps = [0.0f64; 2];
    for (slot, which) in [(0, GapSpace::Multiplicative), (1, GapSpace::MultiplicativeAdjoint)] {
        let w = gap_eigenspace(p, pi, which)?;
        let w_cols: Vec<DVector<f64>> = w
            .vectors()
            .iter()
            .map(|f| DVector::from_fn(p.n(), |x, _| s[x] * f.get(x)))
            .collect();
        overlaps[slot] = projector_overlap(&v_cols, &w_cols);
    }
    let (gamma, gamma2) = (report.gamma, report.gamma2);
    let bound = |beta: f64| {
        let inside = beta * (1.0 - gamma).powi(2) + (1.0 - beta) * (1.0 - gamma2).powi(2);
        (1.0 - inside.max(0.0).sqrt()).clamp(0.0, 1.0)
    };
    Ok(OneSidedGammaBounds {
        bound_la: bound(overlaps[0]),
        bound_ra: bound(overlaps[1]),
        beta: overlaps[0],
        beta_prime: overlaps[1],
        gamma,
        gamma2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::{special_average, AverageKind};
    use crate::group::DEFAULT_GROUP_CAP;

    /// Symmetric random-walk kernel on an undirected edge list: each edge
    /// carries weight 1/3, diagonals complete the rows. Reversible for the
    /// uniform distribution.
    fn edge_walk(n: usize, edges: &[(usize, usize)]) -> MarkovKernel {
        let mut m = DMatrix::zeros(n, n);
        for &(a, b) in edges {
            m[(a, b)] = 1.0 / 3.0;
            m[(b, a)] = 1.0 / 3.0;
        }
        for x in 0..n {
            let off: f64 = (0..n).filter(|&y| y != x).map(|y| m[(x, y)]).sum();
            m[(x, x)] = 1.0 - off;
        }
        MarkovKernel::new(m).unwrap()
    }

    fn flip_group(n: usize) -> FiniteGroup {
        let flip = Perm::new((0..n).map(|x| n - 1 - x).collect()).unwrap();
        FiniteGroup::close_generators(&[flip], DEFAULT_GROUP_CAP).unwrap()
    }

    /// A double average whose `P − Π` representative is symmetric, rank one,
    /// with three equal rows. The backend's bidiagonal SVD once reported its
    /// top singular value 2.5% high (0.5619 instead of 0.5484), which made
    /// the gap of a larger group's average look *smaller* than a subgroup's —
    /// impossible, since the finer average is a contraction of the coarser
    /// one. Frozen from that incident; the closed rank-one value is
    /// `3a² + b²` for the representative `(a,a,b,a)ᵀ(a,a,b,a)`-shaped matrix.
    #[test]
    #[allow(clippy::excessive_precision)] // literals are bit-exact dumps of the incident kernel
    fn low_rank_representative_gets_the_right_top_singular_value() {
        let p = MarkovKernel::from_rows(&[
            vec![
                2.88615064067461180e-1,
                2.88615064067461236e-1,
                1.34154807797616266e-1,
                2.88615064067461236e-1,
            ],
            vec![
                2.88615064067461291e-1,
                2.88615064067461236e-1,
                1.34154807797616127e-1,
                2.88615064067461236e-1,
            ],
            vec![
                1.05823894020528206e-1,
                1.05823894020528206e-1,
                6.82528317938415618e-1,
                1.05823894020528192e-1,
            ],
            vec![
                2.88615064067461347e-1,
                2.88615064067461291e-1,
                1.34154807797616210e-1,
                2.88615064067461236e-1,
            ],
        ])
        .unwrap();
        let pi = Distribution::from_unnormalized(vec![
            2.34317287397202728e-1,
            2.34317287397202728e-1,
            2.97048137808391732e-1,
            2.34317287397202673e-1,
        ])
        .unwrap();
        let rep = spectral_report(&p, &pi).unwrap();
        assert!(
            (rep.gamma - (1.0 - 0.5483735101407993)).abs() <= 1e-9,
            "gamma = {}",
            rep.gamma
        );
        // Reversible kernel: the operator norm must equal the largest
        // non-unit eigenvalue magnitude of the symmetrized spectrum.
        let max_tail =
            rep.eigenvalues[1..].iter().fold(0.0_f64, |acc, &b| acc.max(b.abs()));
        assert!(
            (1.0 - rep.gamma - max_tail).abs() <= 1e-9,
            "sigma_max {} vs eigenvalue magnitude {}",
            1.0 - rep.gamma,
            max_tail
        );
    }

    #[test]
    fn projector_has_unit_gaps() {
        let pi = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let proj = kernel::stationary_projector(&pi);
        let rep = spectral_report(&proj, &pi).unwrap();
        assert!((rep.lambda - 1.0).abs() < 1e-12);
        assert!((rep.gamma - 1.0).abs() < 1e-12);
        assert!((rep.lambda2 - 1.0).abs() < 1e-12);
        assert!((rep.gamma2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_has_zero_gaps() {
        let pi = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let id = MarkovKernel::identity(3);
        let rep = spectral_report(&id, &pi).unwrap();
        assert!(rep.lambda.abs() < 1e-12);
        assert!(rep.gamma.abs() < 1e-12);
    }

    #[test]
    fn two_state_symmetric_chain() {
        let p = MarkovKernel::from_rows(&[vec![0.7, 0.3], vec![0.3, 0.7]]).unwrap();
        let pi = Distribution::uniform(2);
        let rep = spectral_report(&p, &pi).unwrap();
        assert!((rep.lambda - 0.6).abs() < 1e-12);
        assert!((rep.gamma - 0.6).abs() < 1e-12);
        assert_eq!(rep.lambda2, rep.lambda);
        let w = gap_eigenspace(&p, &pi, GapSpace::Additive).unwrap();
        assert_eq!(w.dim(), 1);
        let v = w.vectors()[0].values();
        assert!((v[0] + v[1]).abs() < 1e-10, "gap eigenfunction is odd");
        assert!((v[0].abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn invariant_basis_identity_group_spans_everything() {
        let pi = Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let perms = [Perm::identity(4)];
        let (v, vprime) = invariant_basis(&perms, &pi).unwrap();
        assert_eq!(v.dim(), 4);
        assert_eq!(vprime.dim(), 3);
        assert!(v.orthonormality_residual(&pi).unwrap() < 1e-10);
        assert!(vprime.orthonormality_residual(&pi).unwrap() < 1e-10);
        let comp = invariant_complement_basis(&perms, &pi).unwrap();
        assert_eq!(comp.dim(), 0);
    }

    #[test]
    fn invariant_basis_flip_on_three_states() {
        // Flip fixes the middle state: orbits {0,2} and {1}.
        let pi = Distribution::new(vec![0.25, 0.5, 0.25]).unwrap();
        let flip = Perm::new(vec![2, 1, 0]).unwrap();
        let (v, vprime) = invariant_basis(&[flip.clone()], &pi).unwrap();
        assert_eq!(v.dim(), 2);
        assert_eq!(vprime.dim(), 1);
        let f = &vprime.vectors()[0];
        assert!((f.get(0) - f.get(2)).abs() < 1e-12, "orbit-constant");
        let mean: f64 = (0..3).map(|x| pi.get(x) * f.get(x)).sum();
        assert!(mean.abs() < 1e-12, "centered");
        let comp = invariant_complement_basis(&[flip], &pi).unwrap();
        assert_eq!(comp.dim(), 1);
        // V⊥ holds the odd functions: zero at the fixed point.
        assert!(comp.vectors()[0].get(1).abs() < 1e-10);
    }

    #[test]
    fn centered_invariant_direction_matches_worked_example() {
        let pi = Distribution::uniform(3);
        let swap = Perm::new(vec![1, 0, 2]).unwrap();
        let (_, vprime) = invariant_basis(&[swap], &pi).unwrap();
        assert_eq!(vprime.dim(), 1);
        let f = &vprime.vectors()[0];
        // Spans (1, 1, −2) up to normalization and sign.
        let scale = f.get(0);
        assert!(scale.abs() > 1e-8);
        assert!((f.get(1) / scale - 1.0).abs() < 1e-10);
        assert!((f.get(2) / scale + 2.0).abs() < 1e-10);
    }

    #[test]
    fn gap_eigenspace_residuals_are_tiny() {
        let p = edge_walk(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 3)]);
        let pi = Distribution::uniform(5);
        let rep = spectral_report(&p, &pi).unwrap();
        let w = gap_eigenspace(&p, &pi, GapSpace::Additive).unwrap();
        assert!(w.dim() >= 1);
        assert!(w.orthonormality_residual(&pi).unwrap() < 1e-10);
        // Check ‖(I − (S+Sᵀ)/2) u − λ u‖ ≤ 1e-9 in the Euclidean frame.
        let srep = euclidean_rep(&p, &pi);
        let n = 5;
        let a = DMatrix::from_fn(n, n, |x, y| {
            let sym = 0.5 * (srep[(x, y)] + srep[(y, x)]);
            if x == y {
                1.0 - sym
            } else {
                -sym
            }
        });
        let s = sqrt_pi(&pi);
        for f in w.vectors() {
            let u = DVector::from_fn(n, |x, _| s[x] * f.get(x));
            let resid = (&a * &u - rep.lambda * &u).norm();
            assert!(resid < 1e-9, "eigen-residual {resid}");
        }
    }

    #[test]
    fn trivial_group_bound_collapses_to_lambda() {
        let p = edge_walk(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 3)]);
        let pi = Distribution::uniform(5);
        let group = FiniteGroup::trivial(5);
        let rep = spectral_report(&p, &pi).unwrap();
        let bound = overline_gap_bound(&p, &group, &pi).unwrap();
        assert!((bound.overlap_invariant - 1.0).abs() < 1e-9);
        assert!((bound.bound - rep.lambda).abs() < 1e-9);
        assert!(bound.gap_meets_invariant);

        let gb = gamma_bounds_la_ra(&p, &group, &pi).unwrap();
        assert!((gb.beta - 1.0).abs() < 1e-9);
        assert!((gb.bound_la - rep.gamma).abs() < 1e-9);
        assert!((gb.bound_ra - rep.gamma).abs() < 1e-9);
    }

    #[test]
    fn overline_bound_sandwiches_between_gaps() {
        // Not flip-symmetric: the 0–2 chord has no mirror 5–3 edge.
        let p = edge_walk(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 2)]);
        let pi = Distribution::uniform(6);
        let group = flip_group(6);
        let bound = overline_gap_bound(&p, &group, &pi).unwrap();
        let lam_p = spectral_report(&p, &pi).unwrap().lambda;
        let overline = special_average(&p, &group, &AverageKind::Orbit, &pi).unwrap();
        let lam_avg = spectral_report(&overline, &pi).unwrap().lambda;
        assert!(bound.bound >= lam_p - 1e-9, "bound {} vs λ(P) {lam_p}", bound.bound);
        assert!(lam_avg >= bound.bound - 1e-9, "λ(avg) {lam_avg} vs bound {}", bound.bound);
    }

    #[test]
    fn one_sided_bounds_sandwich_between_gaps() {
        let p = edge_walk(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 2)]);
        let pi = Distribution::uniform(6);
        let group = flip_group(6);
        let gb = gamma_bounds_la_ra(&p, &group, &pi).unwrap();
        // Reversible P: the two singular spaces agree, so β = β'.
        assert!((gb.beta - gb.beta_prime).abs() < 1e-9);
        let la = special_average(&p, &group, &AverageKind::Left, &pi).unwrap();
        let ra = special_average(&p, &group, &AverageKind::Right, &pi).unwrap();
        let g_p = spectral_report(&p, &pi).unwrap().gamma;
        let g_la = spectral_report(&la, &pi).unwrap().gamma;
        let g_ra = spectral_report(&ra, &pi).unwrap().gamma;
        assert!(gb.bound_la >= g_p - 1e-9);
        assert!(gb.bound_ra >= g_p - 1e-9);
        assert!(g_la >= gb.bound_la - 1e-9, "γ(la) {g_la} vs bound {}", gb.bound_la);
        assert!(g_ra >= gb.bound_ra - 1e-9, "γ(ra) {g_ra} vs bound {}", gb.bound_ra);
    }

    #[test]
    fn multiplicative_spaces_of_projector_span_centered_functions() {
        let pi = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let proj = kernel::stationary_projector(&pi);
        let w = gap_eigenspace(&proj, &pi, GapSpace::Multiplicative).unwrap();
        assert_eq!(w.dim(), 2, "all of the mean-zero space");
        assert!(w.orthonormality_residual(&pi).unwrap() < 1e-10);
        for f in w.vectors() {
            let mean: f64 = (0..3).map(|x| pi.get(x) * f.get(x)).sum();
            assert!(mean.abs() < 1e-9, "projected clear of the constants");
        }
    }

    #[test]
    fn report_rejects_non_stationary_pairs() {
        let p = MarkovKernel::from_rows(&[vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        let pi = Distribution::uniform(2);
        assert!(matches!(
            spectral_report(&p, &pi),
            Err(Error::NotStationary { .. })
        ));
    }
}
