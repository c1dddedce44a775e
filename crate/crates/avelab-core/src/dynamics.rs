//! Trajectory-level diagnostics: asymptotic variance and its exact reduction
//! under averaging, conductance, worst-case `L^p` distances to stationarity
//! with their mixing times, seeded path sampling, and the group-extended
//! pseudo-marginal chain.
//!
//! Everything except [`sample_path`] is exact linear algebra on the kernel
//! matrix. Mixing distances come from true matrix powers, the asymptotic
//! variance from a Poisson-equation solve rather than a truncated
//! autocovariance series, and the conductance from exhaustive subset
//! enumeration. Sampling exists only for path-level demonstrations; none of
//! the comparison results depend on Monte Carlo noise.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::averaging::{double_average, MAX_EXTENDED_STATES};
use crate::error::Error;
use crate::group::{is_measure_symmetric, FiniteGroup, PairMeasure};
use crate::Result;
use crate::kernel::{self, MarkovKernel};
use crate::space::{Distribution, ObsFunction};
use crate::spectral::{euclid_complement, euclid_invariant, euclidean_rep, orthonormalize, sqrt_pi};
use crate::tol;

/// Largest state count accepted by the exhaustive [`cheeger`] search; `2ⁿ`
/// subsets are enumerated, so this caps the work at about a million sets.
pub const MAX_CHEEGER_STATES: usize = 20;

/// Which `L^p(π)` norm grades the distance to stationarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpNorm {
    /// `p = 1`: twice the worst-start total-variation distance.
    One,
    /// `p = 2`: the chi-square-flavored norm that pairs with spectral gaps.
    Two,
    /// `p = ∞`: the worst relative density deviation over target states.
    Infinity,
}

/// Distance profile of a kernel in one `L^p(π)` norm: `distances[t]` is the
/// worst-start distance after `t` steps, and `t_mix` records, for each
/// requested threshold, the first time the curve dipped below it.
#[derive(Debug, Clone)]
pub struct MixingCurve {
    /// The norm every entry is measured in.
    pub norm: LpNorm,
    /// `distances[t] = d_p(P, t)` for `t = 0, 1, …`, ending at the last step
    /// taken (all thresholds crossed, or the step budget).
    pub distances: Vec<f64>,
    /// `(ε, first t with d_p(P,t) ≤ ε)` per requested threshold, in request
    /// order; `None` when the curve never crossed within the budget.
    pub t_mix: Vec<(f64, Option<usize>)>,
}

/// A simulated state sequence together with the seed that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    /// Visited states; starts at the initial state, so a `steps`-step run has
    /// `steps + 1` entries.
    pub states: Vec<usize>,
    /// Seed of the deterministic generator behind the path.
    pub seed: u64,
}

/// Everything the Poisson-equation solve behind [`asymptotic_variance`]
/// produces, for callers that want more than the scalar.
#[derive(Debug, Clone)]
pub struct VarianceSolve {
    /// The asymptotic variance `2⟨f,h⟩_π − ⟨f,f⟩_π`.
    pub value: f64,
    /// π-mean projected out of the input before solving. Zero for genuinely
    /// centered observables; anything else flags that the input was silently
    /// recentered (the variance of `f` and `f − E_π f` agree).
    pub mean_removed: f64,
    /// Achieved residual `‖(I−P)h − f‖` of the solve.
    pub solve_residual: f64,
    /// The centered solution `h` of `(I−P)h = f` with zero π-mean — the
    /// maximizer of the variational form in [`variational_variance_bound`].
    pub solution: ObsFunction,
}

fn check_sizes(n: usize, others: &[usize]) -> Result<()> {
    for &got in others {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    Ok(())
}

fn require_stationary(p: &MarkovKernel, pi: &Distribution) -> Result<()> {
    let residual = kernel::stationarity_residual(p, pi)?;
    if residual > tol::STOCHASTIC {
        return Err(Error::NotStationary { residual });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Worst-case L^p distances and mixing times
// ---------------------------------------------------------------------------

/// One row's `L^p(π)` distance between a mass vector and π, i.e.
/// `‖row/π − 1‖_{p,π}`. When a π-null state carries positive mass the density
/// does not exist; the conventional values are `2` for `p = 1` (the
/// total-variation ceiling) and `+∞` otherwise. Strictly positive π — the
/// normal case everywhere in this crate — never takes that branch.
fn row_lp_deviation(row: impl Iterator<Item = f64>, pi: &Distribution, norm: LpNorm) -> f64 {
    let mut acc = 0.0_f64;
    let mut sup = 0.0_f64;
    for (y, mass) in row.enumerate() {
        let w = pi.get(y);
        if w <= 0.0 {
            if mass > 0.0 {
                return match norm {
                    LpNorm::One => 2.0,
                    _ => f64::INFINITY,
                };
            }
            continue;
        }
        let dev = mass / w - 1.0;
        match norm {
            LpNorm::One => acc += w * dev.abs(),
            LpNorm::Two => acc += w * dev * dev,
            LpNorm::Infinity => sup = sup.max(dev.abs()),
        }
    }
    match norm {
        LpNorm::One => acc,
        LpNorm::Two => acc.sqrt(),
        LpNorm::Infinity => sup,
    }
}

fn matrix_lp_distance(m: &DMatrix<f64>, pi: &Distribution, norm: LpNorm) -> f64 {
    (0..m.nrows())
        .map(|x| row_lp_deviation((0..m.ncols()).map(|y| m[(x, y)]), pi, norm))
        .fold(0.0, f64::max)
}

/// Worst-start `L^p(π)` distance of the `t`-step law from stationarity:
/// `max_x ‖Pᵗ(x,·)/π − 1‖_{p,π}`, with `Pᵗ` computed exactly by repeated
/// squaring. At `p = 1` this is twice the worst-start total-variation
/// distance; `t = 0` reports the distance of the worst point mass.
///
/// # Errors
///
/// Size mismatch, or an over/underflowing power computation.
pub fn lp_distance(p: &MarkovKernel, pi: &Distribution, t: usize, norm: LpNorm) -> Result<f64> {
    check_sizes(p.n(), &[pi.n()])?;
    let pt = kernel::power(p, t)?;
    Ok(matrix_lp_distance(pt.matrix(), pi, norm))
}

/// First `t` with `d_p(P,t) ≤ eps`, found by doubling then bisection.
///
/// Bisection is sound because the distance is nonincreasing in `t` for every
/// π-stationary kernel: densities evolve by the adjoint operator, which is a
/// contraction on every `L^p(π)`. The returned `t` therefore satisfies
/// `d_p(P, t−1) > eps ≥ d_p(P, t)` (or is `0` when even the worst point mass
/// is already within `eps`).
///
/// # Errors
///
/// [`Error::NotMixedBy`] when the distance stays above `eps` through `t_max`
/// (periodic chains never cross); [`Error::NotStationary`] when π is not
/// stationary for `P`, which is what makes the distance monotone.
pub fn mixing_time(
    p: &MarkovKernel,
    pi: &Distribution,
    norm: LpNorm,
    eps: f64,
    t_max: usize,
) -> Result<usize> {
    check_sizes(p.n(), &[pi.n()])?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mixing threshold must be positive, got {eps}"
        )));
    }
    require_stationary(p, pi)?;
    if lp_distance(p, pi, 0, norm)? <= eps {
        return Ok(0);
    }
    // Doubling phase: find some t with d(t) ≤ eps, keeping the last t that
    // failed as the bracket floor.
    let mut lo = 0usize;
    let mut hi = 1usize;
    loop {
        let d = lp_distance(p, pi, hi, norm)?;
        if d <= eps {
            break;
        }
        if hi >= t_max {
            return Err(Error::NotMixedBy { t_max });
        }
        lo = hi;
        hi = (hi * 2).min(t_max);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if lp_distance(p, pi, mid, norm)? <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Steps the chain one multiplication at a time, recording the full distance
/// profile and the first crossing of each threshold.
///
/// With thresholds given, stepping stops once all of them have crossed (or at
/// `t_max`, leaving the stragglers `None`); with an empty threshold list the
/// profile runs through `t_max` regardless — the plotting mode.
///
/// # Errors
///
/// Size mismatches, non-positive thresholds, or non-stationary π as in
/// [`mixing_time`].
pub fn mixing_curve(
    p: &MarkovKernel,
    pi: &Distribution,
    norm: LpNorm,
    thresholds: &[f64],
    t_max: usize,
) -> Result<MixingCurve> {
    check_sizes(p.n(), &[pi.n()])?;
    for &eps in thresholds {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mixing threshold must be positive, got {eps}"
            )));
        }
    }
    require_stationary(p, pi)?;
    let n = p.n();
    let mut pow = DMatrix::<f64>::identity(n, n);
    let mut distances = Vec::new();
    let mut t_mix: Vec<(f64, Option<usize>)> = thresholds.iter().map(|&e| (e, None)).collect();
    for t in 0..=t_max {
        if t > 0 {
            pow = &pow * p.matrix();
        }
        let d = matrix_lp_distance(&pow, pi, norm);
        distances.push(d);
        for entry in t_mix.iter_mut() {
            if entry.1.is_none() && d <= entry.0 {
                entry.1 = Some(t);
            }
        }
        if !thresholds.is_empty() && t_mix.iter().all(|e| e.1.is_some()) {
            break;
        }
    }
    Ok(MixingCurve { norm, distances, t_mix })
}

// ---------------------------------------------------------------------------
// Path sampling
// ---------------------------------------------------------------------------

/// Simulates `steps` transitions from `x0` with a deterministic generator:
/// equal seeds give equal paths. Each step inverts the row's CDF in fixed
/// state order, so the map from uniform draws to states is reproducible
/// across platforms.
///
/// # Errors
///
/// Start state out of range.
pub fn sample_path(p: &MarkovKernel, x0: usize, steps: usize, seed: u64) -> Result<Trajectory> {
    if x0 >= p.n() {
        return Err(Error::InvalidParameter(format!(
            "start state {x0} out of range for a {}-state kernel",
            p.n()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = x0;
    states.push(x);
    for _ in 0..steps {
        let u: f64 = rng.gen();
        let mut acc = 0.0_f64;
        let mut next = None;
        let mut last_positive = x;
        for y in 0..p.n() {
            let q = p.entry(x, y);
            if q > 0.0 {
                last_positive = y;
            }
            acc += q;
            if u < acc {
                next = Some(y);
                break;
            }
        }
        // Row sums are 1 up to dust, so an unconsumed draw can only be a
        // rounding artifact at the top of the CDF: take the last real option.
        x = next.unwrap_or(last_positive);
        states.push(x);
    }
    Ok(Trajectory { states, seed })
}

// ---------------------------------------------------------------------------
// Asymptotic variance
// ---------------------------------------------------------------------------

/// Solves the Poisson equation behind the asymptotic variance and returns the
/// full solve report; [`asymptotic_variance`] is the scalar shortcut.
///
/// The variance of the ergodic averages of `f` under a π-stationary chain is
/// `2⟨f,h⟩_π − ⟨f,f⟩_π`, where `h` solves `(I−P)h = f` among mean-zero
/// functions — the closed form of the series `‖f‖² + 2Σ_k ⟨Pᵏf, f⟩`. The
/// input's π-mean is projected out first (reported in `mean_removed`), the
/// solve happens in the mean-zero subspace where `I−P` is invertible, and the
/// residual is verified against [`tol::SOLVE_RESIDUAL`].
///
/// # Errors
///
/// [`Error::UnitSpectralRadius`] when the chain has a non-ergodic component
/// (spectral radius on mean-zero functions at 1, e.g. periodic or reducible
/// chains); [`Error::NotStationary`] when π is not stationary; π must be
/// strictly positive.
pub fn variance_solve(
    f: &ObsFunction,
    p: &MarkovKernel,
    pi: &Distribution,
) -> Result<VarianceSolve> {
    let n = p.n();
    check_sizes(n, &[f.n(), pi.n()])?;
    pi.require_positive()?;
    require_stationary(p, pi)?;
    let mean: f64 = (0..n).map(|x| pi.get(x) * f.get(x)).sum();
    let s = sqrt_pi(pi);
    // Euclidean frame: u = D^{1/2}(f − mean), so π-inner products of functions
    // become plain dot products of vectors.
    let u_f = DVector::from_fn(n, |x, _| (f.get(x) - mean) * s[x]);
    let norm2 = u_f.dot(&u_f);
    if norm2 == 0.0 {
        return Ok(VarianceSolve {
            value: 0.0,
            mean_removed: mean,
            solve_residual: 0.0,
            solution: ObsFunction::constant(n, 0.0),
        });
    }
    let smat = euclidean_rep(p, pi);
    let basis = euclid_complement(&[s.clone()], n);
    let u0 = DMatrix::from_columns(&basis);
    let s0 = u0.transpose() * &smat * &u0;
    let rho = s0.clone().complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if rho >= 1.0 - 1e-9 {
        return Err(Error::UnitSpectralRadius { rho });
    }
    let dim = s0.nrows();
    let a0 = DMatrix::identity(dim, dim) - &s0;
    let b = u0.transpose() * &u_f;
    let w = a0.lu().solve(&b).ok_or(Error::UnitSpectralRadius { rho })?;
    let u_h = &u0 * w;
    let solve_residual = (&u_h - &smat * &u_h - &u_f).norm();
    if solve_residual > tol::SOLVE_RESIDUAL * norm2.sqrt().max(1.0) {
        return Err(Error::Inconclusive(format!(
            "Poisson solve residual {solve_residual:.3e} exceeds {:.1e}",
            tol::SOLVE_RESIDUAL
        )));
    }
    let value = 2.0 * u_f.dot(&u_h) - norm2;
    let solution = ObsFunction::new((0..n).map(|x| u_h[x] / s[x]).collect())?;
    Ok(VarianceSolve { value, mean_removed: mean, solve_residual, solution })
}

/// Asymptotic variance of the ergodic averages of `f` under a π-stationary
/// chain; see [`variance_solve`] for the method and error conditions.
pub fn asymptotic_variance(f: &ObsFunction, p: &MarkovKernel, pi: &Distribution) -> Result<f64> {
    variance_solve(f, p, pi).map(|s| s.value)
}

/// The quadratic form `4⟨f,φ⟩_π − 2⟨(I−P)φ,φ⟩_π − ⟨f,f⟩_π`, whose supremum
/// over φ equals the asymptotic variance when `P` is π-reversible, attained
/// at the Poisson solution `φ = h`. Any φ therefore certifies a lower bound
/// on [`asymptotic_variance`] — an independent cross-check that needs no
/// linear solve. The π-mean of `f` is projected out, which also makes the
/// form invariant to shifting φ by constants.
///
/// # Errors
///
/// Size mismatches only; the form itself is defined for any kernel.
pub fn variational_variance_bound(
    f: &ObsFunction,
    phi: &ObsFunction,
    p: &MarkovKernel,
    pi: &Distribution,
) -> Result<f64> {
    let n = p.n();
    check_sizes(n, &[f.n(), phi.n(), pi.n()])?;
    let mean: f64 = (0..n).map(|x| pi.get(x) * f.get(x)).sum();
    let p_phi = p.apply(phi)?;
    let mut cross = 0.0_f64;
    let mut dirichlet = 0.0_f64;
    let mut norm2 = 0.0_f64;
    for x in 0..n {
        let w = pi.get(x);
        let f0 = f.get(x) - mean;
        cross += w * f0 * phi.get(x);
        dirichlet += w * (phi.get(x) - p_phi.get(x)) * phi.get(x);
        norm2 += w * f0 * f0;
    }
    Ok(4.0 * cross - 2.0 * dirichlet - norm2)
}

/// Predicted vs. observed drop in asymptotic variance when `P` is replaced by
/// its ν-average over `G`.
///
/// For π-reversible `P`, π constant on orbits, ν with uniform marginals and
/// the `(g,h) =_D (h⁻¹,g⁻¹)` symmetry, and an invariant mean-zero observable
/// `f`, the drop equals `2‖𝐏_{A^{−1/2}W} A^{−1/2} f‖²_π`, where `A = I−P`
/// acts on mean-zero functions and `W` is the orthogonal complement of the
/// invariant functions. The two coordinates are computed independently —
/// the prediction from that projection formula via an eigendecomposition of
/// `A`, the observation as `v(f,P) − v(f,P_avg)` through two Poisson solves —
/// so their agreement is a genuine consistency check, not a tautology. The
/// drop is zero exactly when `A` maps the invariant mean-zero functions into
/// themselves at `f`, e.g. whenever `P` commutes with the group action.
///
/// # Errors
///
/// [`Error::HypothesisViolated`] for a non-reversible kernel, a measure
/// without uniform marginals or the required symmetry, or an `f` outside the
/// invariant mean-zero class; [`Error::NotGroupInvariant`] when π varies on
/// an orbit; [`Error::UnitSpectralRadius`] from the variance solves.
pub fn asympvar_reduction(
    f: &ObsFunction,
    p: &MarkovKernel,
    group: &FiniteGroup,
    nu: &PairMeasure,
    pi: &Distribution,
) -> Result<(f64, f64)> {
    let n = p.n();
    check_sizes(n, &[f.n(), pi.n(), group.space_size()])?;
    pi.require_positive()?;
    if !group.is_pi_invariant(pi) {
        return Err(Error::NotGroupInvariant { deviation: group.invariance_deviation(pi) });
    }
    let rev = kernel::reversibility_residual(p, pi)?;
    if rev > tol::STOCHASTIC {
        return Err(Error::HypothesisViolated(format!(
            "the variance-reduction formula needs a π-reversible kernel (residual {rev:.3e})"
        )));
    }
    let m = group.order();
    let mut left = vec![0.0_f64; m];
    let mut right = vec![0.0_f64; m];
    for &(g, h, w) in nu.atoms() {
        if g >= m || h >= m {
            return Err(Error::InvalidPairMeasure(format!(
                "atom ({g}, {h}) indexes past the group order {m}"
            )));
        }
        left[g] += w;
        right[h] += w;
    }
    let uniform = 1.0 / m as f64;
    let marginal_dev = left
        .iter()
        .chain(right.iter())
        .map(|&w| (w - uniform).abs())
        .fold(0.0, f64::max);
    if marginal_dev > tol::DISTRIBUTION {
        return Err(Error::HypothesisViolated(format!(
            "the pair measure must have uniform marginals (deviation {marginal_dev:.3e})"
        )));
    }
    if !is_measure_symmetric(group, nu) {
        return Err(Error::HypothesisViolated(
            "the pair measure must satisfy the (g,h) ↦ (h⁻¹,g⁻¹) symmetry".into(),
        ));
    }
    let scale = (0..n).map(|x| f.get(x).abs()).fold(1.0, f64::max);
    let orbit_dev = group
        .elements()
        .iter()
        .flat_map(|g| (0..n).map(move |x| (f.get(g.apply(x)) - f.get(x)).abs()))
        .fold(0.0, f64::max);
    if orbit_dev > tol::STOCHASTIC * scale {
        return Err(Error::HypothesisViolated(format!(
            "the observable must be constant on orbits (deviation {orbit_dev:.3e})"
        )));
    }
    let mean: f64 = (0..n).map(|x| pi.get(x) * f.get(x)).sum();
    if mean.abs() > tol::STOCHASTIC * scale {
        return Err(Error::HypothesisViolated(format!(
            "the observable must have zero π-mean (got {mean:.3e})"
        )));
    }

    let averaged = double_average(p, group.elements(), nu)?;
    let observed = asymptotic_variance(f, p, pi)? - asymptotic_variance(f, &averaged, pi)?;

    let invariant = euclid_invariant(group.elements(), pi);
    let complement = euclid_complement(&invariant, n);
    if complement.is_empty() {
        return Ok((0.0, observed));
    }
    let s = sqrt_pi(pi);
    let u0 = DMatrix::from_columns(&euclid_complement(&[s.clone()], n));
    let a0 = DMatrix::identity(n - 1, n - 1) - u0.transpose() * euclidean_rep(p, pi) * &u0;
    let eig = a0.symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig <= tol::EXACT {
        return Err(Error::UnitSpectralRadius { rho: 1.0 - min_eig });
    }
    let inv_sqrt = {
        let scaled = DMatrix::from_fn(n - 1, n - 1, |i, j| {
            eig.eigenvectors[(i, j)] / eig.eigenvalues[j].sqrt()
        });
        &scaled * eig.eigenvectors.transpose()
    };
    let u_f = DVector::from_fn(n, |x, _| (f.get(x) - mean) * s[x]);
    let z = &inv_sqrt * (u0.transpose() * u_f);
    // The complement sits inside the mean-zero subspace (the invariant basis
    // contains √π), so the reduced coordinates lose nothing.
    let images: Vec<DVector<f64>> = complement
        .iter()
        .map(|b| &inv_sqrt * (u0.transpose() * b))
        .collect();
    let onb = orthonormalize(images, tol::EIGEN_CLUSTER);
    let projection2: f64 = onb.iter().map(|e| e.dot(&z).powi(2)).sum();
    Ok((2.0 * projection2, observed))
}

// ---------------------------------------------------------------------------
// Conductance
// ---------------------------------------------------------------------------

/// Sorted-list lexicographic order on subsets encoded as bitmasks, with the
/// shorter list preceding its extensions: {0} < {0,1} < {1}.
fn lex_less(mut a: u32, mut b: u32) -> bool {
    while a != 0 && b != 0 {
        let ia = a.trailing_zeros();
        let ib = b.trailing_zeros();
        if ia != ib {
            return ia < ib;
        }
        a &= a - 1;
        b &= b - 1;
    }
    a == 0 && b != 0
}

/// Exact conductance: the minimum over sets `A` with `0 < π(A) ≤ ½` of the
/// escape ratio `[π(A) − Σ_{x,y∈A} π(x)P(x,y)] / π(A)`, with a minimizing set.
///
/// All `2ⁿ − 2` candidate sets are enumerated in Gray-code order, so each
/// differs from its predecessor by one state and the set mass and internal
/// flow update incrementally (with periodic from-scratch refreshes to stop
/// floating-point drift). The mass constraint is inclusive up to `1e-12`, so
/// sets at exactly half mass participate. Ties within `1e-12` of the minimum
/// resolve to the lexicographically smallest set.
///
/// # Errors
///
/// [`Error::TooLarge`] beyond [`MAX_CHEEGER_STATES`] states;
/// [`Error::NotStationary`] when π is not stationary for `P`;
/// [`Error::InvalidParameter`] when no set satisfies the mass constraint
/// (single-state chains, or π concentrated past ½ on every nonempty set).
pub fn cheeger(p: &MarkovKernel, pi: &Distribution) -> Result<(f64, Vec<usize>)> {
    let n = p.n();
    check_sizes(n, &[pi.n()])?;
    if n > MAX_CHEEGER_STATES {
        return Err(Error::TooLarge {
            what: "exhaustive conductance search",
            size: n,
            max: MAX_CHEEGER_STATES,
        });
    }
    require_stationary(p, pi)?;
    let w = DMatrix::from_fn(n, n, |x, y| pi.get(x) * p.entry(x, y));
    let half = 0.5 + 1e-12;

    let mut mask: u32 = 0;
    let mut pi_a = 0.0_f64;
    let mut flow = 0.0_f64; // Σ_{x,y ∈ A} w[x][y]
    let mut cross = vec![0.0_f64; n]; // cross[u] = Σ_{x ∈ A} (w[x][u] + w[u][x])
    let mut best = f64::INFINITY;
    let mut best_mask: u32 = 0;

    let total: u32 = 1 << n;
    for k in 1..total {
        let bit = k.trailing_zeros() as usize;
        if mask & (1 << bit) == 0 {
            flow += cross[bit] + w[(bit, bit)];
            for u in 0..n {
                cross[u] += w[(bit, u)] + w[(u, bit)];
            }
            pi_a += pi.get(bit);
            mask |= 1 << bit;
        } else {
            for u in 0..n {
                cross[u] -= w[(bit, u)] + w[(u, bit)];
            }
            flow -= cross[bit] + w[(bit, bit)];
            pi_a -= pi.get(bit);
            mask &= !(1 << bit);
        }
        if k % 65_536 == 0 {
            // Refresh the running sums so incremental error cannot accumulate
            // over the million-set walk.
            pi_a = (0..n).filter(|&x| mask & (1 << x) != 0).map(|x| pi.get(x)).sum();
            flow = 0.0;
            cross = vec![0.0; n];
            for x in 0..n {
                if mask & (1 << x) == 0 {
                    continue;
                }
                for u in 0..n {
                    cross[u] += w[(x, u)] + w[(u, x)];
                }
                for y in 0..n {
                    if mask & (1 << y) != 0 {
                        flow += w[(x, y)];
                    }
                }
            }
        }
        if pi_a <= 0.0 || pi_a > half {
            continue;
        }
        let ratio = ((pi_a - flow) / pi_a).max(0.0);
        if ratio < best - 1e-12 {
            best = ratio;
            best_mask = mask;
        } else if ratio <= best + 1e-12 {
            best = best.min(ratio);
            if lex_less(mask, best_mask) {
                best_mask = mask;
            }
        }
    }
    if best_mask == 0 {
        return Err(Error::InvalidParameter(
            "no state set satisfies 0 < π(A) ≤ 1/2".into(),
        ));
    }
    let set: Vec<usize> = (0..n).filter(|&x| best_mask & (1 << x) != 0).collect();
    Ok((best, set))
}

// ---------------------------------------------------------------------------
// Pseudo-marginal chain on X × G
// ---------------------------------------------------------------------------

fn check_extended_size(n: usize, m: usize) -> Result<usize> {
    let size = n.checked_mul(m).ok_or(Error::TooLarge {
        what: "group-extended state space",
        size: usize::MAX,
        max: MAX_EXTENDED_STATES,
    })?;
    if size > MAX_EXTENDED_STATES {
        return Err(Error::TooLarge {
            what: "group-extended state space",
            size,
            max: MAX_EXTENDED_STATES,
        });
    }
    Ok(size)
}

/// The extended target on `X × G`: `π̃(x,g) = π(gx)/|G|`, indexed as
/// `x·|G| + g` in the group's element order. Its X-marginal is the orbit
/// average of π — the closest group-invariant distribution to π in relative
/// entropy — and its G-marginal is uniform.
///
/// # Errors
///
/// Size mismatch, non-positive π, or an extended space past
/// [`MAX_EXTENDED_STATES`].
pub fn pmmh_target(pi: &Distribution, group: &FiniteGroup) -> Result<Distribution> {
    let n = pi.n();
    check_sizes(n, &[group.space_size()])?;
    pi.require_positive()?;
    let m = group.order();
    check_extended_size(n, m)?;
    let mut weights = vec![0.0_f64; n * m];
    for x in 0..n {
        for (g, perm) in group.elements().iter().enumerate() {
            weights[x * m + g] = pi.get(perm.apply(x)) / m as f64;
        }
    }
    Distribution::from_unnormalized(weights)
}

/// The pseudo-marginal Metropolis–Hastings kernel on `X × G` targeting
/// [`pmmh_target`]: propose `x' ∼ q(x,·)` and an independent uniform `g'`,
/// accept with probability `min{1, π(g'x')q(x',x) / (π(gx)q(x,x'))}`, else
/// stay. Rejection mass sits on the diagonal, and the move never needs π
/// beyond evaluations at single points — the construction works when only an
/// unnormalized or orbit-scrambled π is available. The result is reversible
/// for the extended target, so its X-marginal chain targets the orbit
/// average of π.
///
/// # Errors
///
/// Size mismatches, non-positive π, or an extended space past
/// [`MAX_EXTENDED_STATES`]. A proposed move with `q(x',x) = 0` is accepted
/// with probability zero rather than erroring: the pair contributes no flow
/// in either direction, so reversibility is preserved.
pub fn pmmh_kernel(
    pi: &Distribution,
    group: &FiniteGroup,
    proposal: &MarkovKernel,
) -> Result<MarkovKernel> {
    let n = pi.n();
    check_sizes(n, &[group.space_size(), proposal.n()])?;
    pi.require_positive()?;
    let m = group.order();
    let size = check_extended_size(n, m)?;
    let elems = group.elements();
    let g_weight = 1.0 / m as f64;
    let mut mat = DMatrix::<f64>::zeros(size, size);
    for x in 0..n {
        for g in 0..m {
            let row = x * m + g;
            let here = pi.get(elems[g].apply(x));
            let mut moved = 0.0_f64;
            for xp in 0..n {
                let q_fwd = proposal.entry(x, xp);
                if q_fwd <= 0.0 {
                    continue;
                }
                let q_back = proposal.entry(xp, x);
                for gp in 0..m {
                    let there = pi.get(elems[gp].apply(xp));
                    let accept = if q_back <= 0.0 {
                        0.0
                    } else {
                        ((there * q_back) / (here * q_fwd)).min(1.0)
                    };
                    let mass = q_fwd * g_weight * accept;
                    mat[(row, xp * m + gp)] += mass;
                    moved += mass;
                }
            }
            mat[(row, row)] += 1.0 - moved;
        }
    }
    MarkovKernel::new(mat)?.with_stationary(&pmmh_target(pi, group)?)
}
