//! A zoo of concrete chains and symmetries: Gibbs targets with Metropolis
//! dynamics on V-shaped potentials (exact and tilted), drift walks and
//! congruential walks on cycles, block-reversal averages, cluster and
//! replica-exchange samplers on tiny product spaces, and the projection /
//! restriction decompositions used to localize spectral gaps.
//!
//! Signed intervals `⟦−n, n⟧` are stored shifted by `n` (state `i`
//! represents `x = i − n`); cycles are `0..n`. Every constructor verifies
//! the stationary law it claims, so returned kernels always carry a checked
//! target.

use std::collections::HashMap;

use crate::averaging::{double_average, special_average, AverageKind, MAX_EXTENDED_STATES};
use crate::error::Error;
use crate::group::{FiniteGroup, PairMeasure, Perm};
use crate::index::MixedRadix;
use crate::kernel::{self, MarkovKernel};
use crate::space::{Distribution, ObsFunction};
use crate::tol;
use crate::Result;

// ---------------------------------------------------------------------------
// Gibbs targets and Metropolis dynamics
// ---------------------------------------------------------------------------

/// A Gibbs target `π_β(x) ∝ e^{−β·H(x)}` given by an energy function and an
/// inverse temperature.
#[derive(Debug, Clone)]
pub struct GibbsSpec {
    hamiltonian: ObsFunction,
    beta: f64,
}

impl GibbsSpec {
    /// Rejects negative or non-finite inverse temperatures.
    pub fn new(hamiltonian: ObsFunction, beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "inverse temperature must be finite and nonnegative, got {beta}"
            )));
        }
        Ok(Self { hamiltonian, beta })
    }

    pub fn hamiltonian(&self) -> &ObsFunction {
        &self.hamiltonian
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `log Z_β = log Σ_x e^{−β·H(x)}`, evaluated against the minimum energy
    /// so the sum never overflows.
    pub fn log_partition(&self) -> f64 {
        let h = self.hamiltonian.values();
        let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);
        let sum: f64 = h.iter().map(|&v| (-self.beta * (v - h_min)).exp()).sum();
        -self.beta * h_min + sum.ln()
    }
}

/// The Gibbs distribution `π_β(x) = e^{−β·H(x)} / Z_β`.
///
/// Weights are shifted by the minimum energy before exponentiation, so every
/// state keeps strictly positive mass and the normalization is safe at any
/// admissible `β`. At `β = 0` this is the uniform law.
pub fn gibbs(spec: &GibbsSpec) -> Distribution {
    let h = spec.hamiltonian().values();
    let h_min = h.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = h.iter().map(|&v| (-spec.beta() * (v - h_min)).exp()).collect();
    Distribution::from_unnormalized(w).expect("shifted Gibbs weights lie in (0, 1]")
}

/// Metropolis–Hastings correction of `proposal` toward the target `pi`:
///
/// ```text
///     P(x, y) = q(x, y) · min{1, π(y) q(y, x) / (π(x) q(x, y))},   y ≠ x,
/// ```
///
/// with the rejected mass returned to the diagonal. The result is
/// `π`-reversible by construction and is returned with its target attached.
/// A symmetric proposal under a uniform target is accepted everywhere, so
/// `P = q` in that case.
///
/// # Errors
/// `ZeroMassState` if the target gives some state probability zero — the
/// acceptance ratio is undefined there.
pub fn metropolis_hastings(proposal: &MarkovKernel, pi: &Distribution) -> Result<MarkovKernel> {
    if proposal.n() != pi.n() {
        return Err(Error::DimensionMismatch { expected: proposal.n(), got: pi.n() });
    }
    pi.require_positive()?;
    let n = pi.n();
    let mut rows = vec![vec![0.0; n]; n];
    for (x, row) in rows.iter_mut().enumerate() {
        let mut moved = 0.0;
        for (y, slot) in row.iter_mut().enumerate() {
            if y == x {
                continue;
            }
            let q_fwd = proposal.entry(x, y);
            if q_fwd == 0.0 {
                continue;
            }
            let ratio = pi.get(y) * proposal.entry(y, x) / (pi.get(x) * q_fwd);
            let mass = q_fwd * ratio.min(1.0);
            *slot = mass;
            moved += mass;
        }
        row[x] = (1.0 - moved).max(0.0);
    }
    MarkovKernel::from_rows(&rows)?.with_stationary(pi)
}

// ---------------------------------------------------------------------------
// Permutation builders and named symmetry families
// ---------------------------------------------------------------------------

/// Cyclic shift `i ↦ i + 1 (mod n)`.
pub fn shift_perm(n: usize) -> Result<Perm> {
    if n == 0 {
        return Err(Error::InvalidParameter("shift needs a nonempty cycle".into()));
    }
    Perm::new((0..n).map(|i| (i + 1) % n).collect())
}

/// Sign flip `x ↦ −x` on the signed interval `⟦−n, n⟧`, i.e. `i ↦ 2n − i`
/// on the shifted indices.
pub fn flip_perm(half_n: usize) -> Perm {
    let size = 2 * half_n + 1;
    Perm::new((0..size).map(|i| size - 1 - i).collect()).expect("reflection is a bijection")
}

/// Block reversal `σ^(j)` on the cycle `0..n`: split into `n / 2^j`
/// consecutive blocks of length `2^j` and reverse each block in place.
/// `σ^(0)` is the identity and every `σ^(j)` is an involution.
pub fn block_reversal_perm(n: usize, j: u32) -> Result<Perm> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "block reversal needs a power-of-two cycle, got {n}"
        )));
    }
    if j > n.trailing_zeros() {
        return Err(Error::InvalidParameter(format!(
            "block length 2^{j} exceeds the cycle size {n}"
        )));
    }
    let block = 1usize << j;
    let map = (0..n).map(|i| (i / block) * block + (block - 1 - i % block)).collect();
    Ok(Perm::new(map).expect("blockwise reversal is a bijection"))
}

/// Modular multiplication `x ↦ a·x (mod n)`, a bijection iff `gcd(a, n) = 1`.
pub fn mult_perm(n: usize, a: u64) -> Result<Perm> {
    if n == 0 {
        return Err(Error::InvalidParameter("multiplication needs a nonempty modulus".into()));
    }
    let a = a % n as u64;
    if gcd(a, n as u64) != 1 {
        return Err(Error::InvalidParameter(format!(
            "multiplier {a} is not invertible modulo {n}"
        )));
    }
    Perm::new((0..n).map(|x| ((a as u128 * x as u128) % n as u128) as usize).collect())
}

/// Affine power map `x ↦ a·x^k (mod n)` on a prime modulus, fixing `0`.
/// This is a bijection of `0..n` exactly when `a ≢ 0` and `gcd(k, n−1) = 1`;
/// its inverse is `x ↦ (a⁻¹·x)^m` for `m·k ≡ 1 (mod n−1)`.
pub fn power_perm(n: usize, a: u64, k: u64) -> Result<Perm> {
    if !is_prime(n as u64) {
        return Err(Error::InvalidParameter(format!(
            "power maps need a prime modulus, got {n}"
        )));
    }
    let m = n as u64;
    let a = a % m;
    if a == 0 {
        return Err(Error::InvalidParameter(format!(
            "coefficient 0 is not invertible modulo {n}"
        )));
    }
    if k == 0 || gcd(k, m - 1) != 1 {
        return Err(Error::InvalidParameter(format!(
            "exponent {k} is not invertible modulo {}",
            m - 1
        )));
    }
    let map = (0..n)
        .map(|x| ((a as u128 * mod_pow(x as u64, k, m) as u128) % m as u128) as usize)
        .collect();
    Perm::new(map)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn mod_pow(base: u64, mut exp: u64, modulus: u64) -> u64 {
    let m = modulus as u128;
    let mut base = base as u128 % m;
    let mut acc: u128 = 1 % m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc as u64
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Smallest primitive root of the prime `p`.
fn primitive_root(p: u64) -> u64 {
    if p == 2 {
        return 1;
    }
    let m = p - 1;
    let mut factors = Vec::new();
    let mut rest = m;
    let mut d = 2;
    while d * d <= rest {
        if rest.is_multiple_of(d) {
            factors.push(d);
            while rest.is_multiple_of(d) {
                rest /= d;
            }
        }
        d += 1;
    }
    if rest > 1 {
        factors.push(rest);
    }
    (2..p)
        .find(|&g| factors.iter().all(|&f| mod_pow(g, m / f, p) != 1))
        .expect("every prime has a primitive root")
}

/// Greedy generating set for the unit group `(Z/m)^×`: sweep the units in
/// increasing order and keep each one not already generated. The group is
/// abelian, so closing the running subgroup under one extra generator only
/// needs repeated multiplication.
fn unit_group_generators(m: u64) -> Vec<u64> {
    if m <= 2 {
        return Vec::new();
    }
    let mut closure: Vec<bool> = vec![false; m as usize];
    closure[1] = true;
    let mut gens = Vec::new();
    for u in 2..m {
        if gcd(u, m) != 1 || closure[u as usize] {
            continue;
        }
        gens.push(u);
        let mut frontier: Vec<u64> =
            (0..m).filter(|&v| closure[v as usize]).collect();
        while let Some(v) = frontier.pop() {
            let w = (v as u128 * u as u128 % m as u128) as u64;
            if !closure[w as usize] {
                closure[w as usize] = true;
                frontier.push(w);
            }
        }
    }
    gens
}

/// The symmetry families used by the worked models. Each variant describes a
/// generator list; callers close it into a group on demand. The power-map
/// family in particular is returned as generators only — its closure has
/// order `(n−1)·φ(n−1)` and is never enumerated here.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupSpec {
    /// Cyclic shift on `n` points: generator `x ↦ x + 1 (mod n)`.
    Shift { n: usize },
    /// Sign flip on the signed interval `⟦−n, n⟧` (`2n + 1` states).
    Flip { half_n: usize },
    /// Block reversals `σ^(0), …, σ^(k)` on a cycle of length `n = 2^k`.
    BlockReversal { n: usize },
    /// Multiplication by a fixed unit: `x ↦ a·x (mod n)`.
    ModMult { n: usize, a: u64 },
    /// Affine power maps `x ↦ a·x^k (mod n)` on a prime `n ≥ 3`: generated
    /// by multiplication by a primitive root together with `x ↦ x^k` for a
    /// generating set of exponents `k` in `(Z/(n−1))^×`.
    PowerMap { n: usize },
}

/// Generator lists for the named symmetry families. Every permutation is
/// validated as a bijection, and the block-reversal involution property is
/// checked rather than assumed.
pub fn named_group(spec: &GroupSpec) -> Result<Vec<Perm>> {
    match *spec {
        GroupSpec::Shift { n } => Ok(vec![shift_perm(n)?]),
        GroupSpec::Flip { half_n } => Ok(vec![flip_perm(half_n)]),
        GroupSpec::BlockReversal { n } => {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::InvalidParameter(format!(
                    "block reversals need a power-of-two cycle of length >= 2, got {n}"
                )));
            }
            let k = n.trailing_zeros();
            let mut gens = Vec::with_capacity(k as usize + 1);
            for j in 0..=k {
                let sigma = block_reversal_perm(n, j)?;
                if !sigma.then(&sigma).is_identity() {
                    return Err(Error::NotAGroup {
                        reason: format!("block reversal at level {j} is not an involution"),
                    });
                }
                gens.push(sigma);
            }
            Ok(gens)
        }
        GroupSpec::ModMult { n, a } => Ok(vec![mult_perm(n, a)?]),
        GroupSpec::PowerMap { n } => {
            if n < 3 || !is_prime(n as u64) {
                return Err(Error::InvalidParameter(format!(
                    "the power-map family needs a prime modulus >= 3, got {n}"
                )));
            }
            let mut gens = vec![mult_perm(n, primitive_root(n as u64))?];
            for k in unit_group_generators(n as u64 - 1) {
                gens.push(power_perm(n, 1, k)?);
            }
            Ok(gens)
        }
    }
}

// ---------------------------------------------------------------------------
// V-shaped potentials
// ---------------------------------------------------------------------------

/// `H(x) = −|x|` on `⟦−n, n⟧`: wells at both endpoints, barrier at the
/// origin, exactly symmetric under the sign flip.
pub fn vshape_hamiltonian(n: usize) -> ObsFunction {
    let size = 2 * n + 1;
    ObsFunction::new((0..size).map(|i| -((i as f64) - n as f64).abs()).collect())
        .expect("V-shaped energies are finite")
}

/// `H_δ(x) = −|x + δ|` on `⟦−n, n⟧`: the same two-well potential tilted so
/// its target is no longer flip-invariant. Requires `0 < δ < 1/2`, which
/// keeps the energy ordering of the two wells strict but bounded.
pub fn vshape_perturbed_hamiltonian(n: usize, delta: f64) -> Result<ObsFunction> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "the tilt must lie strictly inside (0, 1/2), got {delta}"
        )));
    }
    let size = 2 * n + 1;
    Ok(ObsFunction::new((0..size).map(|i| -((i as f64) - n as f64 + delta).abs()).collect())
        .expect("tilted V-shaped energies are finite"))
}

/// Nearest-neighbour proposal on `⟦−n, n⟧` with lazy endpoints: interior
/// states split their mass evenly between the two neighbours; each endpoint
/// keeps probability `1/2` on itself and sends `1/2` inward.
pub fn vshape_proposal(n: usize) -> MarkovKernel {
    let size = 2 * n + 1;
    let mut rows = vec![vec![0.0; size]; size];
    for (i, row) in rows.iter_mut().enumerate() {
        row[i.saturating_sub(1)] += 0.5;
        row[(i + 1).min(size - 1)] += 0.5;
    }
    MarkovKernel::from_rows(&rows).expect("proposal rows sum to one")
}

// ---------------------------------------------------------------------------
// Named chains
// ---------------------------------------------------------------------------

/// The worked chains, keyed by name and parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// Metropolis chain for `π_β ∝ e^{β|x|}` on `⟦−n, n⟧` over the lazy
    /// nearest-neighbour proposal.
    VShape { n: usize, beta: f64 },
    /// The same chain with the tilted potential `H_δ(x) = −|x + δ|`.
    VShapePerturbed { n: usize, beta: f64, delta: f64 },
    /// Drift walk on `2n` states: step forward with probability `1 − 1/n`,
    /// otherwise jump to the mirror image of the forward neighbour.
    Dhn { half_n: usize },
    /// The right average of the drift walk under the mirror involution:
    /// forward step and mirrored forward step with probability `1/2` each.
    DhnRightAveraged { half_n: usize },
    /// Congruential walk `x ↦ a·x + ε (mod n)` with `ε` uniform on
    /// `{−1, 0, 1}`.
    Cdg { n: usize, a: u64 },
    /// Symmetric simple random walk on the `n`-cycle.
    SrwCycle { n: usize },
}

/// Builds a named chain together with its stationary law. Stationarity is
/// verified at construction, so the returned kernel always carries a
/// checked target (the drift, congruential, and cycle walks are doubly
/// stochastic; the V-shaped chains are reversible for their Gibbs law).
pub fn named_model(spec: &ModelSpec) -> Result<(MarkovKernel, Distribution)> {
    match *spec {
        ModelSpec::VShape { n, beta } => {
            let pi = gibbs(&GibbsSpec::new(vshape_hamiltonian(n), beta)?);
            let p = metropolis_hastings(&vshape_proposal(n), &pi)?;
            Ok((p, pi))
        }
        ModelSpec::VShapePerturbed { n, beta, delta } => {
            let h = vshape_perturbed_hamiltonian(n, delta)?;
            let pi = gibbs(&GibbsSpec::new(h, beta)?);
            let p = metropolis_hastings(&vshape_proposal(n), &pi)?;
            Ok((p, pi))
        }
        ModelSpec::Dhn { half_n } => dhn_kernel(half_n, false),
        ModelSpec::DhnRightAveraged { half_n } => dhn_kernel(half_n, true),
        ModelSpec::Cdg { n, a } => {
            let third = 1.0 / 3.0;
            let p = cdg_kernel(n, a, &[(-1, third), (0, third), (1, third)])?;
            Ok((p, Distribution::uniform(n)))
        }
        ModelSpec::SrwCycle { n } => srw_cycle_kernel(n),
    }
}

/// Drift walk on `2n` states (`averaged = false`), or its right average
/// under the mirror `x ↦ 2n − 1 − x` (`averaged = true`), which replaces
/// the `(1 − 1/n, 1/n)` branch weights by `(1/2, 1/2)`.
fn dhn_kernel(half_n: usize, averaged: bool) -> Result<(MarkovKernel, Distribution)> {
    if half_n == 0 {
        return Err(Error::InvalidParameter("the drift walk needs at least two states".into()));
    }
    let size = 2 * half_n;
    let jump = if averaged { 0.5 } else { 1.0 / half_n as f64 };
    let mut rows = vec![vec![0.0; size]; size];
    for (x, row) in rows.iter_mut().enumerate() {
        let next = (x + 1) % size;
        row[next] += 1.0 - jump;
        row[size - 1 - next] += jump;
    }
    let pi = Distribution::uniform(size);
    let p = MarkovKernel::from_rows(&rows)?.with_stationary(&pi)?;
    Ok((p, pi))
}

/// Congruential walk `x ↦ a·x + ε (mod n)` for an invertible multiplier and
/// a noise law given as `(offset, probability)` atoms. Every row is a
/// permutation of the noise law, so the walk is doubly stochastic and the
/// uniform law is stationary for any admissible `a`.
pub fn cdg_kernel(n: usize, a: u64, noise: &[(i64, f64)]) -> Result<MarkovKernel> {
    let g = mult_perm(n, a)?;
    if noise.is_empty() {
        return Err(Error::InvalidParameter("the noise law needs at least one atom".into()));
    }
    let mut rows = vec![vec![0.0; n]; n];
    let mut total = 0.0;
    for &(offset, w) in noise {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidParameter(format!("noise weight {w} is not a probability")));
        }
        total += w;
        let shift = offset.rem_euclid(n as i64) as usize;
        for x in 0..n {
            rows[x][(g.apply(x) + shift) % n] += w;
        }
    }
    if (total - 1.0).abs() > tol::DISTRIBUTION {
        return Err(Error::NotADistribution { sum: total, tol: tol::DISTRIBUTION });
    }
    MarkovKernel::from_rows(&rows)?.with_stationary(&Distribution::uniform(n))
}

fn srw_cycle_kernel(n: usize) -> Result<(MarkovKernel, Distribution)> {
    if n == 0 {
        return Err(Error::InvalidParameter("the cycle walk needs a nonempty cycle".into()));
    }
    let mut rows = vec![vec![0.0; n]; n];
    for x in 0..n {
        rows[x][(x + 1) % n] += 0.5;
        rows[x][(x + n - 1) % n] += 0.5;
    }
    let pi = Distribution::uniform(n);
    let p = MarkovKernel::from_rows(&rows)?.with_stationary(&pi)?;
    Ok((p, pi))
}

/// The double average of the `n`-cycle walk under its block reversals, with
/// the uniform product pair measure on the `k + 1` generators:
///
/// ```text
///     P_da = (k+1)^{−2} · Σ_{i,j} U_{σ^(i)} P U_{σ^(j)},   n = 2^k.
/// ```
///
/// The closed group generated by the reversals is astronomically large, so
/// the average deliberately runs over the generator list alone. The result
/// is symmetric, hence reversible for the uniform law it is returned with.
pub fn block_reversal_average(k: u32) -> Result<(MarkovKernel, Distribution)> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "block-reversal averaging needs a cycle of length >= 2".into(),
        ));
    }
    let n = 1usize.checked_shl(k).unwrap_or(usize::MAX);
    if n > MAX_EXTENDED_STATES {
        return Err(Error::TooLarge {
            what: "block-reversal cycle",
            size: n,
            max: MAX_EXTENDED_STATES,
        });
    }
    let (p, pi) = named_model(&ModelSpec::SrwCycle { n })?;
    let perms = named_group(&GroupSpec::BlockReversal { n })?;
    let m = perms.len();
    let w = 1.0 / (m * m) as f64;
    let atoms: Vec<(usize, usize, f64)> =
        (0..m).flat_map(|i| (0..m).map(move |j| (i, j, w))).collect();
    let nu = PairMeasure::new(atoms)?;
    let pda = double_average(&p, &perms, &nu)?.with_stationary(&pi)?;
    Ok((pda, pi))
}

// ---------------------------------------------------------------------------
// Projection and restriction decompositions
// ---------------------------------------------------------------------------

/// Collapses a `π`-stationary chain onto a partition of the state space:
///
/// ```text
///     P̂(A, B) = Σ_{x ∈ A} π(x) P(x, B) / π(A),        π̂(A) = π(A).
/// ```
///
/// If `P` is `π`-reversible the projection is `π̂`-reversible.
///
/// # Errors
/// Rejects non-stationary inputs, block lists that fail to partition the
/// state space, and blocks of zero mass (reported as a zero-mass state of
/// the projected chain).
pub fn projection_chain(
    p: &MarkovKernel,
    pi: &Distribution,
    blocks: &[Vec<usize>],
) -> Result<(MarkovKernel, Distribution)> {
    let n = p.n();
    if pi.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: pi.n() });
    }
    let residual = kernel::stationarity_residual(p, pi)?;
    if residual > tol::STOCHASTIC {
        return Err(Error::NotStationary { residual });
    }
    if blocks.is_empty() {
        return Err(Error::InvalidParameter("projection needs at least one block".into()));
    }
    let mut owner = vec![usize::MAX; n];
    for (b, block) in blocks.iter().enumerate() {
        if block.is_empty() {
            return Err(Error::InvalidParameter(format!("block {b} is empty")));
        }
        for &x in block {
            if x >= n {
                return Err(Error::InvalidParameter(format!(
                    "block {b} references state {x}, outside 0..{n}"
                )));
            }
            if owner[x] != usize::MAX {
                return Err(Error::InvalidParameter(format!(
                    "state {x} appears in more than one block"
                )));
            }
            owner[x] = b;
        }
    }
    if let Some(x) = (0..n).find(|&x| owner[x] == usize::MAX) {
        return Err(Error::InvalidParameter(format!(
            "state {x} is not covered by any block"
        )));
    }
    let masses: Vec<f64> = blocks.iter().map(|b| pi.mass(b)).collect();
    if let Some(b) = masses.iter().position(|&m| m <= 0.0) {
        return Err(Error::ZeroMassState { state: b });
    }
    let m = blocks.len();
    let mut rows = vec![vec![0.0; m]; m];
    for (b, block) in blocks.iter().enumerate() {
        for &x in block {
            let w = pi.get(x) / masses[b];
            for y in 0..n {
                let pxy = p.entry(x, y);
                if pxy != 0.0 {
                    rows[b][owner[y]] += w * pxy;
                }
            }
        }
    }
    let pi_hat = Distribution::new(masses)?;
    let p_hat = MarkovKernel::from_rows(&rows)?.with_stationary(&pi_hat)?;
    Ok((p_hat, pi_hat))
}

/// Restricts a reversible chain to a subset by folding every escape move
/// back onto the diagonal:
///
/// ```text
///     P^A(x, y) = P(x, y) + 1{x = y} · P(x, Aᶜ),   x, y ∈ A,
/// ```
///
/// returned with `π` renormalized on `A` (the folded chain inherits detailed
/// balance, which is why reversibility is required rather than mere
/// stationarity). States keep the order they have in `block`.
pub fn restriction_chain(
    p: &MarkovKernel,
    pi: &Distribution,
    block: &[usize],
) -> Result<(MarkovKernel, Distribution)> {
    let n = p.n();
    if pi.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: pi.n() });
    }
    let residual = kernel::reversibility_residual(p, pi)?;
    if residual > tol::STOCHASTIC {
        return Err(Error::HypothesisViolated(format!(
            "restriction needs a reversible chain; detailed-balance residual {residual:.3e}"
        )));
    }
    if block.is_empty() {
        return Err(Error::InvalidParameter("restriction needs a nonempty subset".into()));
    }
    let mut inside = vec![false; n];
    for &x in block {
        if x >= n {
            return Err(Error::InvalidParameter(format!(
                "subset references state {x}, outside 0..{n}"
            )));
        }
        if inside[x] {
            return Err(Error::InvalidParameter(format!("state {x} is listed twice")));
        }
        inside[x] = true;
    }
    let mass = pi.mass(block);
    if mass <= 0.0 {
        return Err(Error::ZeroMassState { state: block[0] });
    }
    let m = block.len();
    let mut rows = vec![vec![0.0; m]; m];
    for (i, &x) in block.iter().enumerate() {
        for (j, &y) in block.iter().enumerate() {
            rows[i][j] = p.entry(x, y);
        }
        let escape: f64 = (0..n).filter(|&y| !inside[y]).map(|y| p.entry(x, y)).sum();
        rows[i][i] += escape;
    }
    let pi_hat = Distribution::from_unnormalized(block.iter().map(|&x| pi.get(x)).collect())?;
    let p_hat = MarkovKernel::from_rows(&rows)?.with_stationary(&pi_hat)?;
    Ok((p_hat, pi_hat))
}

// ---------------------------------------------------------------------------
// Extended (augmented) state spaces
// ---------------------------------------------------------------------------

/// A joint law on a product `base × aux`, flattened as
/// `flat = base_index · aux_size + aux_index` (base digit most significant).
#[derive(Debug, Clone)]
pub struct ExtendedModel {
    base_size: usize,
    aux_size: usize,
    joint: Distribution,
}

impl ExtendedModel {
    /// The joint law must live on exactly `base_size · aux_size` points.
    pub fn new(base_size: usize, aux_size: usize, joint: Distribution) -> Result<Self> {
        if base_size == 0 || aux_size == 0 {
            return Err(Error::InvalidParameter("product factors must be nonempty".into()));
        }
        let expected = base_size
            .checked_mul(aux_size)
            .ok_or(Error::TooLarge { what: "product space", size: usize::MAX, max: MAX_EXTENDED_STATES })?;
        if joint.n() != expected {
            return Err(Error::DimensionMismatch { expected, got: joint.n() });
        }
        Ok(Self { base_size, aux_size, joint })
    }

    pub fn base_size(&self) -> usize {
        self.base_size
    }

    pub fn aux_size(&self) -> usize {
        self.aux_size
    }

    pub fn joint(&self) -> &Distribution {
        &self.joint
    }

    pub fn flat(&self, base: usize, aux: usize) -> usize {
        debug_assert!(base < self.base_size && aux < self.aux_size);
        base * self.aux_size + aux
    }

    pub fn split(&self, flat: usize) -> (usize, usize) {
        (flat / self.aux_size, flat % self.aux_size)
    }

    /// Marginal law of the base coordinate.
    pub fn base_marginal(&self) -> Distribution {
        let mut w = vec![0.0; self.base_size];
        for flat in 0..self.joint.n() {
            w[flat / self.aux_size] += self.joint.get(flat);
        }
        Distribution::new(w).expect("marginals of a distribution sum to one")
    }

    /// Marginal law of the auxiliary coordinate.
    pub fn aux_marginal(&self) -> Distribution {
        let mut w = vec![0.0; self.aux_size];
        for flat in 0..self.joint.n() {
            w[flat % self.aux_size] += self.joint.get(flat);
        }
        Distribution::new(w).expect("marginals of a distribution sum to one")
    }
}

// ---------------------------------------------------------------------------
// Swendsen–Wang cluster sampler on a tiny graph
// ---------------------------------------------------------------------------

/// Potts energy `H(σ) = −Σ_{(i,j) ∈ E} 1{σ_i = σ_j}` on spin configurations
/// `[q]^sites`, indexed with site 0 as the most significant digit.
pub fn potts_hamiltonian(sites: usize, edges: &[(usize, usize)], q: usize) -> Result<ObsFunction> {
    let (radix, edges) = spin_layout(sites, edges, q)?;
    let values = (0..radix.size())
        .map(|s| {
            let spins = radix.decode(s);
            -(edges.iter().filter(|&&(i, j)| spins[i] == spins[j]).count() as f64)
        })
        .collect();
    Ok(ObsFunction::new(values).expect("Potts energies are finite"))
}

fn spin_layout(
    sites: usize,
    edges: &[(usize, usize)],
    q: usize,
) -> Result<(MixedRadix, Vec<(usize, usize)>)> {
    if sites == 0 || q < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least one site and two spin values, got {sites} sites with q = {q}"
        )));
    }
    for &(i, j) in edges {
        if i >= sites || j >= sites {
            return Err(Error::InvalidParameter(format!(
                "edge ({i}, {j}) references a site outside 0..{sites}"
            )));
        }
        if i == j {
            return Err(Error::InvalidParameter(format!("edge ({i}, {j}) is a self-loop")));
        }
    }
    Ok((MixedRadix::new(vec![q; sites])?, edges.to_vec()))
}

/// The Swendsen–Wang augmentation on a tiny graph: the joint spin/bond law,
/// its two half-steps, their composition, and the classical cluster-flip
/// sampler enumerated independently on the spin space.
///
/// The bond refresh draws each bond as an independent Bernoulli that can
/// only open on monochromatic edges; the spin resample redraws the spins
/// from their conditional law given the bonds. That conditional law equals
/// the fibre average over the group of per-site spin relabelings (the
/// action is transitive on spin space with constant fibre size), which is
/// why no explicit group enumeration is needed. Joint states of zero mass
/// are frozen in place by the resample; they are unreachable from any
/// positive state, so the convention never influences the checked laws.
#[derive(Debug, Clone)]
pub struct SwendsenWang {
    extended: ExtendedModel,
    sites: usize,
    q: usize,
    edges: Vec<(usize, usize)>,
    spin_radix: MixedRadix,
    bond_radix: MixedRadix,
    bond_refresh: MarkovKernel,
    spin_resample: MarkovKernel,
    joint_step: MarkovKernel,
    spin_oracle: MarkovKernel,
}

impl SwendsenWang {
    pub fn extended(&self) -> &ExtendedModel {
        &self.extended
    }

    /// Joint law `π̃(σ, b) ∝ Π_e (1 − q_e)^{1−b_e} (q_e·1{σ_i = σ_j})^{b_e}`
    /// with `q_e = 1 − e^{−β}`.
    pub fn joint(&self) -> &Distribution {
        self.extended.joint()
    }

    /// Spin marginal of the joint law; equals the Potts Gibbs law at `β`.
    pub fn spin_marginal(&self) -> Distribution {
        self.extended.base_marginal()
    }

    /// Bond refresh `(σ, b) → (σ, b')`: independent Bernoulli bonds, open
    /// with probability `q_e` on monochromatic edges and closed otherwise.
    pub fn bond_refresh(&self) -> &MarkovKernel {
        &self.bond_refresh
    }

    /// Spin resample `(σ, b) → (σ', b)` from the conditional law
    /// `π̃(σ' | b)`: uniform over cluster-constant configurations.
    pub fn spin_resample(&self) -> &MarkovKernel {
        &self.spin_resample
    }

    /// One full sweep: bond refresh followed by spin resample.
    pub fn joint_step(&self) -> &MarkovKernel {
        &self.joint_step
    }

    /// The classical cluster sampler on spins alone, enumerated directly:
    /// draw bonds given `σ`, then recolour each connected cluster uniformly.
    /// Construction verifies that the spin marginal of [`Self::joint_step`]
    /// reproduces these rows from every positive joint state.
    pub fn spin_oracle(&self) -> &MarkovKernel {
        &self.spin_oracle
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn spin_index(&self, spins: &[usize]) -> usize {
        self.spin_radix.encode(spins)
    }

    pub fn spin_config(&self, index: usize) -> Vec<usize> {
        self.spin_radix.decode(index)
    }

    pub fn bond_index(&self, bonds: &[usize]) -> usize {
        self.bond_radix.encode(bonds)
    }

    pub fn bond_config(&self, index: usize) -> Vec<usize> {
        self.bond_radix.decode(index)
    }

    pub fn flat(&self, spin: usize, bond: usize) -> usize {
        self.extended.flat(spin, bond)
    }
}

/// Builds the Swendsen–Wang augmentation for `q`-state spins on the given
/// edge list at inverse temperature `beta`. The full joint space
/// `q^sites · 2^|E|` is enumerated, so it is capped at
/// [`MAX_EXTENDED_STATES`].
pub fn swendsen_wang_model(
    sites: usize,
    edges: &[(usize, usize)],
    q: usize,
    beta: f64,
) -> Result<SwendsenWang> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "inverse temperature must be finite and nonnegative, got {beta}"
        )));
    }
    let (spin_radix, edges) = spin_layout(sites, edges, q)?;
    let bond_radix = MixedRadix::new(vec![2; edges.len()])?;
    let n_spin = spin_radix.size();
    let n_bond = bond_radix.size();
    let total = n_spin.saturating_mul(n_bond);
    if total > MAX_EXTENDED_STATES {
        return Err(Error::TooLarge { what: "spin-bond space", size: total, max: MAX_EXTENDED_STATES });
    }
    let q_e = -(-beta).exp_m1();

    // Unnormalized joint weights; a configuration is inadmissible exactly
    // when some open bond sits on a bichromatic edge.
    let mut weights = vec![0.0; total];
    for s in 0..n_spin {
        let spins = spin_radix.decode(s);
        for b in 0..n_bond {
            let bonds = bond_radix.decode(b);
            let mut w = 1.0;
            for (e, &(i, j)) in edges.iter().enumerate() {
                if bonds[e] == 1 {
                    if spins[i] != spins[j] {
                        w = 0.0;
                        break;
                    }
                    w *= q_e;
                } else {
                    w *= 1.0 - q_e;
                }
            }
            weights[s * n_bond + b] = w;
        }
    }
    let joint = Distribution::from_unnormalized(weights.clone())?;

    // Bond refresh: the row depends on the spins only.
    let mut refresh_rows = vec![vec![0.0; total]; total];
    for s in 0..n_spin {
        let spins = spin_radix.decode(s);
        let mut row = vec![0.0; n_bond];
        for (b_next, slot) in row.iter_mut().enumerate() {
            let bonds = bond_radix.decode(b_next);
            let mut w = 1.0;
            for (e, &(i, j)) in edges.iter().enumerate() {
                let open = q_e * if spins[i] == spins[j] { 1.0 } else { 0.0 };
                w *= if bonds[e] == 1 { open } else { 1.0 - open };
            }
            *slot = w;
        }
        for b in 0..n_bond {
            refresh_rows[s * n_bond + b][s * n_bond..(s + 1) * n_bond].copy_from_slice(&row);
        }
    }
    let bond_refresh = MarkovKernel::from_rows(&refresh_rows)?.with_stationary(&joint)?;

    // Spin resample: conditional law of the spins given the bonds.
    let mut bond_mass = vec![0.0; n_bond];
    for s in 0..n_spin {
        for (b, mass) in bond_mass.iter_mut().enumerate() {
            *mass += weights[s * n_bond + b];
        }
    }
    let mut resample_rows = vec![vec![0.0; total]; total];
    for s in 0..n_spin {
        for b in 0..n_bond {
            let row = &mut resample_rows[s * n_bond + b];
            if bond_mass[b] == 0.0 {
                row[s * n_bond + b] = 1.0;
                continue;
            }
            for s_next in 0..n_spin {
                row[s_next * n_bond + b] = weights[s_next * n_bond + b] / bond_mass[b];
            }
        }
    }
    let spin_resample = MarkovKernel::from_rows(&resample_rows)?.with_stationary(&joint)?;
    let joint_step = kernel::compose(&bond_refresh, &spin_resample)?.with_stationary(&joint)?;

    // Classical cluster sampler, enumerated independently: for each spin
    // configuration, sum over admissible bond draws and recolour the
    // resulting clusters uniformly.
    let mut oracle_rows = vec![vec![0.0; n_spin]; n_spin];
    for (s, row) in oracle_rows.iter_mut().enumerate() {
        let spins = spin_radix.decode(s);
        let open_candidates: Vec<usize> = (0..edges.len())
            .filter(|&e| spins[edges[e].0] == spins[edges[e].1])
            .collect();
        for mask in 0..(1usize << open_candidates.len()) {
            let opened = mask.count_ones() as i32;
            let prob =
                q_e.powi(opened) * (1.0 - q_e).powi(open_candidates.len() as i32 - opened);
            if prob == 0.0 {
                continue;
            }
            let mut parent: Vec<usize> = (0..sites).collect();
            for (pos, &e) in open_candidates.iter().enumerate() {
                if mask >> pos & 1 == 1 {
                    let (i, j) = edges[e];
                    let (ri, rj) = (uf_root(&mut parent, i), uf_root(&mut parent, j));
                    if ri != rj {
                        parent[ri] = rj;
                    }
                }
            }
            let roots: Vec<usize> =
                (0..sites).filter(|&v| uf_root(&mut parent, v) == v).collect();
            let recolourings = (q as f64).powi(roots.len() as i32);
            let mut colour = vec![0usize; roots.len()];
            loop {
                let mut spins_next = vec![0usize; sites];
                for (v, spin) in spins_next.iter_mut().enumerate() {
                    let r = uf_root(&mut parent, v);
                    let pos = roots.iter().position(|&w| w == r).expect("root is listed");
                    *spin = colour[pos];
                }
                row[spin_radix.encode(&spins_next)] += prob / recolourings;
                // odometer over cluster colours
                let mut carry = 0;
                loop {
                    if carry == colour.len() {
                        break;
                    }
                    colour[carry] += 1;
                    if colour[carry] < q {
                        break;
                    }
                    colour[carry] = 0;
                    carry += 1;
                }
                if carry == colour.len() {
                    break;
                }
            }
        }
    }
    let spin_marginal = {
        let mut w = vec![0.0; n_spin];
        for (s, mass) in w.iter_mut().enumerate() {
            for b in 0..n_bond {
                *mass += joint.get(s * n_bond + b);
            }
        }
        Distribution::new(w)?
    };
    let spin_oracle = MarkovKernel::from_rows(&oracle_rows)?.with_stationary(&spin_marginal)?;

    // Consistency gate: from every positive joint state, the spin marginal
    // of the full sweep must reproduce the cluster sampler's row.
    for z in 0..total {
        if joint.get(z) == 0.0 {
            continue;
        }
        let s = z / n_bond;
        for s_next in 0..n_spin {
            let marginal: f64 =
                (0..n_bond).map(|b| joint_step.entry(z, s_next * n_bond + b)).sum();
            let dev = (marginal - spin_oracle.entry(s, s_next)).abs();
            if dev > tol::STOCHASTIC {
                return Err(Error::HypothesisViolated(format!(
                    "cluster sampler and two-step sweep disagree by {dev:.3e} from state {z}"
                )));
            }
        }
    }

    let extended = ExtendedModel::new(n_spin, n_bond, joint)?;
    Ok(SwendsenWang {
        extended,
        sites,
        q,
        edges,
        spin_radix,
        bond_radix,
        bond_refresh,
        spin_resample,
        joint_step,
        spin_oracle,
    })
}

fn uf_root(parent: &mut [usize], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

// ---------------------------------------------------------------------------
// Parallel tempering as a group average
// ---------------------------------------------------------------------------

/// Replica exchange on `X^n × S_n`: each of the `n` coordinates carries a
/// ladder slot via an assignment permutation (`assignment[i]` is the slot of
/// coordinate `i`), so a state is a vector of (value, temperature) pairs.
///
/// * `level` is the conjugation average, over the pair-permuting symmetric
///   group, of a Metropolis move on coordinate 0 at that coordinate's own
///   temperature — equivalently, a uniformly chosen coordinate moves at its
///   current temperature.
/// * `swap` is the double average of the deterministic-proposal exchange of
///   the first two pairs, taken under the pair measure supported on
///   `(g, g⁻¹)` with the first two coordinates sent to adjacent positions —
///   equivalently, a uniformly chosen adjacent pair proposes to trade
///   values, accepted with the usual exchange ratio.
/// * `composite = level · swap` preserves the joint law without being
///   reversible; `reversible` is the half/half mixture, which is.
#[derive(Debug, Clone)]
pub struct ParallelTempering {
    extended: ExtendedModel,
    betas: Vec<f64>,
    assignments: Vec<Vec<usize>>,
    value_radix: MixedRadix,
    level: MarkovKernel,
    swap: MarkovKernel,
    composite: MarkovKernel,
    reversible: MarkovKernel,
}

impl ParallelTempering {
    pub fn extended(&self) -> &ExtendedModel {
        &self.extended
    }

    /// Joint law `π̃(x, a) ∝ Π_i e^{−β_{a_i}·H(x_i)}` over value vectors and
    /// slot assignments.
    pub fn joint(&self) -> &Distribution {
        self.extended.joint()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Slot assignments in lexicographic order; `assignments()[a][i]` is the
    /// ladder slot carried by coordinate `i` under assignment index `a`.
    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn level(&self) -> &MarkovKernel {
        &self.level
    }

    pub fn swap(&self) -> &MarkovKernel {
        &self.swap
    }

    pub fn composite(&self) -> &MarkovKernel {
        &self.composite
    }

    pub fn reversible(&self) -> &MarkovKernel {
        &self.reversible
    }

    pub fn state_index(&self, values: &[usize], assignment: usize) -> usize {
        self.extended.flat(self.value_radix.encode(values), assignment)
    }

    pub fn state_config(&self, flat: usize) -> (Vec<usize>, usize) {
        let (v, a) = self.extended.split(flat);
        (self.value_radix.decode(v), a)
    }
}

/// Builds the replica-exchange sampler for the energy `h` at the given
/// inverse temperatures, using `proposal` for every within-level move. The
/// full space `|X|^n · n!` is enumerated, so it is capped at
/// [`MAX_EXTENDED_STATES`].
pub fn parallel_tempering_model(
    h: &ObsFunction,
    betas: &[f64],
    proposal: &MarkovKernel,
) -> Result<ParallelTempering> {
    let (movers, value_radix, assignments) = pt_ingredients(h, betas, proposal)?;
    let n = betas.len();
    let n_fact = assignments.len();
    let total = value_radix.size() * n_fact;

    let joint = pt_joint(h, betas, &value_radix, &assignments)?;

    // Move on coordinate 0 at its current slot's temperature; all other
    // pairs frozen.
    let mut p1_rows = vec![vec![0.0; total]; total];
    for (a_idx, assignment) in assignments.iter().enumerate() {
        let mover = &movers[assignment[0]];
        for v in 0..value_radix.size() {
            let mut values = value_radix.decode(v);
            let z = v * n_fact + a_idx;
            let x0 = values[0];
            for y0 in 0..mover.n() {
                let w = mover.entry(x0, y0);
                if w != 0.0 {
                    values[0] = y0;
                    p1_rows[z][value_radix.encode(&values) * n_fact + a_idx] += w;
                }
            }
        }
    }
    let p1 = MarkovKernel::from_rows(&p1_rows)?;

    // The symmetric group acting on (value, slot) pairs, realized on flat
    // indices: (g·z)_i = z_{g⁻¹(i)} for both the values and the slots.
    let mut assignment_index = HashMap::new();
    for (i, a) in assignments.iter().enumerate() {
        assignment_index.insert(a.clone(), i);
    }
    let mut flat_perms = Vec::with_capacity(n_fact);
    for g in &assignments {
        let mut g_inv = vec![0; n];
        for (i, &gi) in g.iter().enumerate() {
            g_inv[gi] = i;
        }
        let mut map = vec![0; total];
        for v in 0..value_radix.size() {
            let values = value_radix.decode(v);
            let moved_values: Vec<usize> = (0..n).map(|i| values[g_inv[i]]).collect();
            let v_moved = value_radix.encode(&moved_values) * n_fact;
            for (a_idx, assignment) in assignments.iter().enumerate() {
                let moved_assignment: Vec<usize> = (0..n).map(|i| assignment[g_inv[i]]).collect();
                map[v * n_fact + a_idx] = v_moved + assignment_index[&moved_assignment];
            }
        }
        flat_perms.push(Perm::new(map)?);
    }
    let group = FiniteGroup::from_elements(flat_perms.clone())?;
    let level = special_average(&p1, &group, &AverageKind::Orbit, &joint)?.with_stationary(&joint)?;

    // Exchange of the first two pairs, accepted with the usual ratio; the
    // pair measure relabels it onto every adjacent position.
    let swap = if n == 1 {
        MarkovKernel::identity(total).with_stationary(&joint)?
    } else {
        let mut p2_rows = vec![vec![0.0; total]; total];
        for (a_idx, assignment) in assignments.iter().enumerate() {
            for v in 0..value_radix.size() {
                let mut values = value_radix.decode(v);
                let z = v * n_fact + a_idx;
                let accept = pt_swap_acceptance(h, betas, &values, assignment, 0);
                values.swap(0, 1);
                let z_swapped = value_radix.encode(&values) * n_fact + a_idx;
                p2_rows[z][z_swapped] += accept;
                p2_rows[z][z] += 1.0 - accept;
            }
        }
        let p2 = MarkovKernel::from_rows(&p2_rows)?;
        let weight = 1.0 / factorial(n - 1) as f64;
        let mut atoms = Vec::new();
        for (g, flat) in assignments.iter().zip(&flat_perms) {
            let mut g_inv = vec![0; n];
            for (i, &gi) in g.iter().enumerate() {
                g_inv[gi] = i;
            }
            if g_inv[1] == g_inv[0] + 1 {
                let idx = group.index_of(flat).expect("group contains its own elements");
                atoms.push((idx, group.inverse_index(idx), weight));
            }
        }
        let nu = PairMeasure::new(atoms)?;
        double_average(&p2, group.elements(), &nu)?.with_stationary(&joint)?
    };

    let composite = kernel::compose(&level, &swap)?.with_stationary(&joint)?;
    let reversible = kernel::mixture(&[0.5, 0.5], &[&level, &swap])?.with_stationary(&joint)?;
    let extended = ExtendedModel::new(value_radix.size(), n_fact, joint)?;
    Ok(ParallelTempering {
        extended,
        betas: betas.to_vec(),
        assignments,
        value_radix,
        level,
        swap,
        composite,
        reversible,
    })
}

/// The same replica-exchange sweep enumerated directly, with no averaging
/// machinery: a uniformly chosen coordinate moves at its current
/// temperature, then a uniformly chosen adjacent pair proposes to trade
/// values. Exists to cross-check [`parallel_tempering_model`].
pub fn parallel_tempering_direct(
    h: &ObsFunction,
    betas: &[f64],
    proposal: &MarkovKernel,
) -> Result<MarkovKernel> {
    let (movers, value_radix, assignments) = pt_ingredients(h, betas, proposal)?;
    let n = betas.len();
    let n_fact = assignments.len();
    let total = value_radix.size() * n_fact;

    let mut level_rows = vec![vec![0.0; total]; total];
    let coord_weight = 1.0 / n as f64;
    for (a_idx, assignment) in assignments.iter().enumerate() {
        for v in 0..value_radix.size() {
            let values = value_radix.decode(v);
            let z = v * n_fact + a_idx;
            for i in 0..n {
                let mover = &movers[assignment[i]];
                let mut moved = values.clone();
                for y in 0..mover.n() {
                    let w = mover.entry(values[i], y);
                    if w != 0.0 {
                        moved[i] = y;
                        level_rows[z][value_radix.encode(&moved) * n_fact + a_idx] +=
                            coord_weight * w;
                    }
                }
            }
        }
    }
    let level = MarkovKernel::from_rows(&level_rows)?;
    if n == 1 {
        return Ok(level);
    }

    let mut swap_rows = vec![vec![0.0; total]; total];
    let pair_weight = 1.0 / (n - 1) as f64;
    for (a_idx, assignment) in assignments.iter().enumerate() {
        for v in 0..value_radix.size() {
            let values = value_radix.decode(v);
            let z = v * n_fact + a_idx;
            for i in 0..n - 1 {
                let accept = pt_swap_acceptance(h, betas, &values, assignment, i);
                let mut swapped = values.clone();
                swapped.swap(i, i + 1);
                swap_rows[z][value_radix.encode(&swapped) * n_fact + a_idx] +=
                    pair_weight * accept;
                swap_rows[z][z] += pair_weight * (1.0 - accept);
            }
        }
    }
    kernel::compose(&level, &MarkovKernel::from_rows(&swap_rows)?)
}

fn pt_ingredients(
    h: &ObsFunction,
    betas: &[f64],
    proposal: &MarkovKernel,
) -> Result<(Vec<MarkovKernel>, MixedRadix, Vec<Vec<usize>>)> {
    if proposal.n() != h.n() {
        return Err(Error::DimensionMismatch { expected: h.n(), got: proposal.n() });
    }
    if betas.is_empty() {
        return Err(Error::InvalidParameter("need at least one temperature".into()));
    }
    let n = betas.len();
    let total = (1..=n)
        .try_fold(1usize, |acc, k| acc.checked_mul(k))
        .and_then(|n_fact| (0..n).try_fold(n_fact, |acc, _| acc.checked_mul(h.n())))
        .unwrap_or(usize::MAX);
    if total > MAX_EXTENDED_STATES {
        return Err(Error::TooLarge {
            what: "replica space",
            size: total,
            max: MAX_EXTENDED_STATES,
        });
    }
    let movers = betas
        .iter()
        .map(|&beta| metropolis_hastings(proposal, &gibbs(&GibbsSpec::new(h.clone(), beta)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((movers, MixedRadix::new(vec![h.n(); n])?, all_permutations(n)))
}

/// Joint replica law, accumulated slot-by-slot so that states in the same
/// symmetry orbit sum identical floats in identical order — the invariance
/// is exact, not merely within roundoff.
fn pt_joint(
    h: &ObsFunction,
    betas: &[f64],
    value_radix: &MixedRadix,
    assignments: &[Vec<usize>],
) -> Result<Distribution> {
    let n = betas.len();
    let n_fact = assignments.len();
    let mut log_w = vec![0.0; value_radix.size() * n_fact];
    for (a_idx, assignment) in assignments.iter().enumerate() {
        let mut coord_of_slot = vec![0; n];
        for (i, &slot) in assignment.iter().enumerate() {
            coord_of_slot[slot] = i;
        }
        for v in 0..value_radix.size() {
            let values = value_radix.decode(v);
            let mut lw = 0.0;
            for slot in 0..n {
                lw -= betas[slot] * h.get(values[coord_of_slot[slot]]);
            }
            log_w[v * n_fact + a_idx] = lw;
        }
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Distribution::from_unnormalized(log_w.iter().map(|&lw| (lw - max).exp()).collect())
}

/// Exchange acceptance for trading the values at positions `i` and `i + 1`:
/// `min{1, e^{−(β_{a_{i+1}} − β_{a_i})(H(x_i) − H(x_{i+1}))}}`.
fn pt_swap_acceptance(
    h: &ObsFunction,
    betas: &[f64],
    values: &[usize],
    assignment: &[usize],
    i: usize,
) -> f64 {
    let d_beta = betas[assignment[i + 1]] - betas[assignment[i]];
    let d_energy = h.get(values[i]) - h.get(values[i + 1]);
    (-d_beta * d_energy).exp().min(1.0)
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// All permutations of `0..n` in lexicographic order (chosen so assignment
/// indices are reproducible across the library).
fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    fn extend(out: &mut Vec<Vec<usize>>, prefix: &mut Vec<usize>, used: &mut [bool]) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                extend(out, prefix, used);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut out, &mut Vec::with_capacity(n), &mut vec![false; n]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::{sd_average, Side};
    use crate::group::{perm_kernel, DEFAULT_GROUP_CAP};
    use crate::kernel::stationary_projector;
    use crate::spectral::spectral_report;

    fn max_row_dev(p: &MarkovKernel, rows: &[Vec<f64>]) -> f64 {
        let mut dev: f64 = 0.0;
        for (x, row) in rows.iter().enumerate() {
            for (y, &v) in row.iter().enumerate() {
                dev = dev.max((p.entry(x, y) - v).abs());
            }
        }
        dev
    }

    #[test]
    fn gibbs_at_zero_temperature_parameter_is_uniform() {
        let spec = GibbsSpec::new(vshape_hamiltonian(2), 0.0).unwrap();
        let pi = gibbs(&spec);
        let uniform = Distribution::uniform(5);
        assert!(pi.max_deviation(&uniform) <= 1e-15);
    }

    #[test]
    fn gibbs_on_the_small_well_matches_hand_normalization() {
        // H = -|x| on ⟦-1, 1⟧ at β = 1: weights (e, 1, e).
        let spec = GibbsSpec::new(vshape_hamiltonian(1), 1.0).unwrap();
        let pi = gibbs(&spec);
        let z = 2.0 * 1.0f64.exp() + 1.0;
        assert!((pi.get(0) - 1.0f64.exp() / z).abs() <= 1e-15);
        assert!((pi.get(1) - 1.0 / z).abs() <= 1e-15);
        assert!((pi.get(2) - pi.get(0)).abs() <= 1e-15);
        assert!((spec.log_partition() - z.ln()).abs() <= 1e-12);
    }

    #[test]
    fn gibbs_matches_direct_normalization_on_the_deep_well() {
        let spec = GibbsSpec::new(vshape_hamiltonian(3), 2.0).unwrap();
        let pi = gibbs(&spec);
        let expected = [
            0.43294155364658626,
            0.05859226778765991,
            0.00792960115651841,
            0.00107315481847079,
            0.00792960115651841,
            0.05859226778765991,
            0.43294155364658626,
        ];
        for (i, &e) in expected.iter().enumerate() {
            assert!((pi.get(i) - e).abs() <= 1e-12, "state {i}");
        }
    }

    #[test]
    fn gibbs_rejects_bad_temperatures() {
        assert!(GibbsSpec::new(vshape_hamiltonian(1), -0.5).is_err());
        assert!(GibbsSpec::new(vshape_hamiltonian(1), f64::NAN).is_err());
    }

    #[test]
    fn metropolis_accepts_everything_under_a_uniform_target() {
        let (proposal, pi) = named_model(&ModelSpec::SrwCycle { n: 5 }).unwrap();
        let p = metropolis_hastings(&proposal, &pi).unwrap();
        assert!(p.max_abs_diff(&proposal) <= 1e-15);
    }

    #[test]
    fn metropolis_matches_the_closed_form_on_the_well() {
        // Off-diagonal entries are q(x,y)·e^{-β(H(y)-H(x))⁺} with q = 1/2.
        let (p, _) = named_model(&ModelSpec::VShape { n: 2, beta: 1.0 }).unwrap();
        let e1 = (-1.0f64).exp();
        let rows = vec![
            vec![1.0 - 0.5 * e1, 0.5 * e1, 0.0, 0.0, 0.0],
            vec![0.5, 0.5 * (1.0 - e1), 0.5 * e1, 0.0, 0.0],
            vec![0.0, 0.5, 0.0, 0.5, 0.0],
            vec![0.0, 0.0, 0.5 * e1, 0.5 * (1.0 - e1), 0.5],
            vec![0.0, 0.0, 0.0, 0.5 * e1, 1.0 - 0.5 * e1],
        ];
        assert!(max_row_dev(&p, &rows) <= 1e-15);
    }

    #[test]
    fn metropolis_is_reversible_for_arbitrary_positive_targets() {
        let proposal = vshape_proposal(2);
        for weights in [vec![0.3, 0.05, 0.25, 0.1, 0.3], vec![1.0, 2.0, 3.0, 4.0, 5.0]] {
            let pi = Distribution::from_unnormalized(weights).unwrap();
            let p = metropolis_hastings(&proposal, &pi).unwrap();
            assert!(p.reversible_verified());
            assert!(kernel::reversibility_residual(&p, &pi).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn metropolis_rejects_zero_mass_targets() {
        let pi = Distribution::new(vec![0.5, 0.5, 0.0]).unwrap();
        match metropolis_hastings(&vshape_proposal(1), &pi) {
            Err(Error::ZeroMassState { state }) => assert_eq!(state, 2),
            other => panic!("expected a zero-mass error, got {other:?}"),
        }
    }

    #[test]
    fn every_named_model_carries_a_verified_stationary_law() {
        let specs = [
            ModelSpec::VShape { n: 3, beta: 1.5 },
            ModelSpec::VShapePerturbed { n: 3, beta: 1.0, delta: 0.25 },
            ModelSpec::Dhn { half_n: 3 },
            ModelSpec::DhnRightAveraged { half_n: 3 },
            ModelSpec::Cdg { n: 7, a: 3 },
            ModelSpec::SrwCycle { n: 6 },
        ];
        for spec in specs {
            let (p, pi) = named_model(&spec).unwrap();
            assert!(p.stationary_verified(), "{spec:?}");
            assert!(kernel::stationarity_residual(&p, &pi).unwrap() <= 1e-10, "{spec:?}");
        }
    }

    #[test]
    fn vshape_at_infinite_temperature_is_the_bare_proposal() {
        let (p, pi) = named_model(&ModelSpec::VShape { n: 1, beta: 0.0 }).unwrap();
        assert!(p.max_abs_diff(&vshape_proposal(1)) <= 1e-15);
        assert!(pi.max_deviation(&Distribution::uniform(3)) <= 1e-15);
    }

    #[test]
    fn vshape_is_fixed_by_conjugation_and_twisted_averages_but_not_one_sided() {
        let (p, pi) = named_model(&ModelSpec::VShape { n: 3, beta: 1.0 }).unwrap();
        let group = FiniteGroup::close_generators(&[flip_perm(3)], DEFAULT_GROUP_CAP).unwrap();
        let conj = special_average(&p, &group, &AverageKind::Orbit, &pi).unwrap();
        let twisted = special_average(&p, &group, &AverageKind::Twisted, &pi).unwrap();
        assert!(p.max_abs_diff(&conj) <= 1e-14);
        assert!(p.max_abs_diff(&twisted) <= 1e-14);
        let expected_gap = 0.4080301397071394;
        for kind in [AverageKind::Left, AverageKind::Right, AverageKind::Double] {
            let avg = special_average(&p, &group, &kind, &pi).unwrap();
            assert!((p.max_abs_diff(&avg) - expected_gap).abs() <= 1e-9, "{kind:?}");
        }
    }

    #[test]
    fn vshape_double_average_gap_dominates_the_cubic_bound() {
        for n in 2..=8usize {
            for beta in [0.5, 1.0, 2.0] {
                let (p, pi) = named_model(&ModelSpec::VShape { n, beta }).unwrap();
                let group =
                    FiniteGroup::close_generators(&[flip_perm(n)], DEFAULT_GROUP_CAP).unwrap();
                let lara = special_average(&p, &group, &AverageKind::Double, &pi).unwrap();
                let gap = spectral_report(&lara, &pi).unwrap().lambda;
                let bound = (1.0 - (-beta).exp()) / (36.0 * (n as f64).powi(3));
                assert!(gap >= bound - 1e-12, "n={n} beta={beta}: {gap} < {bound}");
            }
        }
    }

    #[test]
    fn perturbed_vshape_needs_the_state_dependent_average() {
        let (p, pi) =
            named_model(&ModelSpec::VShapePerturbed { n: 3, beta: 1.0, delta: 0.25 }).unwrap();
        let group = FiniteGroup::close_generators(&[flip_perm(3)], DEFAULT_GROUP_CAP).unwrap();
        match special_average(&p, &group, &AverageKind::Double, &pi) {
            Err(Error::NotGroupInvariant { deviation }) => assert!(deviation > 1e-3),
            other => panic!("expected a group-invariance failure, got {other:?}"),
        }
        let qpq = sd_average(&p, &group, &pi, Side::Both).unwrap();
        assert!(kernel::stationarity_residual(&qpq, &pi).unwrap() <= 1e-12);
    }

    #[test]
    fn perturbed_vshape_two_sided_gap_dominates_the_tilted_bound() {
        for n in 2..=6usize {
            for beta in [0.5, 1.0, 2.0] {
                for delta in [0.1, 0.25, 0.4] {
                    let (p, pi) =
                        named_model(&ModelSpec::VShapePerturbed { n, beta, delta }).unwrap();
                    let group =
                        FiniteGroup::close_generators(&[flip_perm(n)], DEFAULT_GROUP_CAP).unwrap();
                    let qpq = sd_average(&p, &group, &pi, Side::Both).unwrap();
                    let gap = spectral_report(&qpq, &pi).unwrap().lambda;
                    let bound = (1.0 - (-beta).exp())
                        / (36.0 * (n as f64).powi(3) * (2.0 * beta * delta).exp());
                    assert!(gap >= bound - 1e-12, "n={n} beta={beta} delta={delta}");
                }
            }
        }
    }

    #[test]
    fn drift_walk_rows_match_the_display() {
        let (p, _) = named_model(&ModelSpec::Dhn { half_n: 2 }).unwrap();
        let rows = vec![
            vec![0.0, 0.5, 0.5, 0.0],
            vec![0.0, 0.5, 0.5, 0.0],
            vec![0.5, 0.0, 0.0, 0.5],
            vec![0.5, 0.0, 0.0, 0.5],
        ];
        assert!(max_row_dev(&p, &rows) <= 1e-15);
    }

    #[test]
    fn drift_walk_is_a_two_atom_double_average_of_the_shift() {
        let half_n = 3;
        let size = 2 * half_n;
        let (p, _) = named_model(&ModelSpec::Dhn { half_n }).unwrap();
        let shift = perm_kernel(&shift_perm(size).unwrap());
        let mirror = Perm::new((0..size).map(|i| size - 1 - i).collect()).unwrap();
        let jump = 1.0 / half_n as f64;
        let nu = PairMeasure::new(vec![(0, 0, 1.0 - jump), (0, 1, jump)]).unwrap();
        let rebuilt =
            double_average(&shift, &[Perm::identity(size), mirror], &nu).unwrap();
        assert!(p.max_abs_diff(&rebuilt) <= 1e-15);
    }

    #[test]
    fn right_averaged_drift_walk_splits_the_branches_evenly() {
        let size = 6;
        let (p, _) = named_model(&ModelSpec::Dhn { half_n: 3 }).unwrap();
        let (p_ra, _) = named_model(&ModelSpec::DhnRightAveraged { half_n: 3 }).unwrap();
        assert!(p.max_abs_diff(&p_ra) > 0.1);
        let shift = perm_kernel(&shift_perm(size).unwrap());
        let mirror =
            perm_kernel(&Perm::new((0..size).map(|i| size - 1 - i).collect()).unwrap());
        let mixed = kernel::mixture(
            &[0.5, 0.5],
            &[&shift, &kernel::compose(&shift, &mirror).unwrap()],
        )
        .unwrap();
        assert!(p_ra.max_abs_diff(&mixed) <= 1e-15);
    }

    #[test]
    fn congruential_walk_factors_as_multiply_then_noise() {
        let (k, pi) = named_model(&ModelSpec::Cdg { n: 5, a: 2 }).unwrap();
        let third = 1.0 / 3.0;
        let noise = cdg_kernel(5, 1, &[(-1, third), (0, third), (1, third)]).unwrap();
        let multiply = perm_kernel(&mult_perm(5, 2).unwrap());
        let composed = kernel::compose(&multiply, &noise).unwrap();
        assert!(k.max_abs_diff(&composed) <= 1e-15);
        assert!(pi.max_deviation(&Distribution::uniform(5)) <= 1e-15);
    }

    #[test]
    fn congruential_walk_rejects_non_invertible_multipliers() {
        assert!(named_model(&ModelSpec::Cdg { n: 6, a: 2 }).is_err());
        assert!(named_model(&ModelSpec::Cdg { n: 5, a: 2 }).is_ok());
    }

    #[test]
    fn left_averaging_the_congruential_walk_never_shrinks_the_gap() {
        for (n, a, coarse) in [(5usize, 2u64, 0.460655), (7, 3, 0.251007), (11, 2, 0.105831)] {
            let (k, pi) = named_model(&ModelSpec::Cdg { n, a }).unwrap();
            let group =
                FiniteGroup::close_generators(&[mult_perm(n, a).unwrap()], DEFAULT_GROUP_CAP)
                    .unwrap();
            let averaged = special_average(&k, &group, &AverageKind::Left, &pi).unwrap();
            let gamma = spectral_report(&k, &pi).unwrap().gamma;
            let gamma_avg = spectral_report(&averaged, &pi).unwrap().gamma;
            assert!((gamma - coarse).abs() <= 1e-5, "n={n}: gamma {gamma}");
            assert!(gamma_avg >= gamma - 1e-9, "n={n}: {gamma_avg} < {gamma}");
        }
    }

    #[test]
    fn shift_averaging_any_doubly_stochastic_chain_hits_stationarity_in_one_step() {
        // Left averaging under the full cycle group turns any uniform-
        // stationary chain into the rank-1 projector onto uniform.
        let (k, pi) = named_model(&ModelSpec::Cdg { n: 7, a: 3 }).unwrap();
        let group =
            FiniteGroup::close_generators(&[shift_perm(7).unwrap()], DEFAULT_GROUP_CAP).unwrap();
        assert_eq!(group.order(), 7);
        for kind in [AverageKind::Left, AverageKind::Right] {
            let averaged = special_average(&k, &group, &kind, &pi).unwrap();
            assert!(averaged.max_abs_diff(&stationary_projector(&pi)) <= 1e-12, "{kind:?}");
        }
    }

    #[test]
    fn block_reversals_match_their_tabulated_values() {
        let sigma5 = block_reversal_perm(32, 5).unwrap();
        for i in 0..32 {
            assert_eq!(sigma5.apply(i), 31 - i);
        }
        let sigma2 = block_reversal_perm(32, 2).unwrap();
        assert_eq!(sigma2.apply(0), 3);
        assert_eq!(sigma2.apply(1), 2);
        assert_eq!(sigma2.apply(4), 7);
        assert_eq!(sigma2.apply(5), 6);
        for j in 0..=5 {
            let sigma = block_reversal_perm(32, j).unwrap();
            assert!(sigma.then(&sigma).is_identity(), "level {j}");
        }
        assert!(block_reversal_perm(32, 0).unwrap().is_identity());
        assert!(flip_perm(4).then(&flip_perm(4)).is_identity());
    }

    #[test]
    fn block_reversal_average_gap_beats_the_generator_count_bound() {
        let expected = [(2u32, 1.0), (3, 0.875)];
        for k in 2..=6u32 {
            let (pda, pi) = block_reversal_average(k).unwrap();
            assert!(pda.reversible_verified());
            let gap = spectral_report(&pda, &pi).unwrap().lambda;
            let bound = 1.0 / ((k + 1) as f64).powi(2);
            assert!(gap >= bound, "k={k}: {gap} < {bound}");
            if let Some(&(_, lambda)) = expected.iter().find(|&&(kk, _)| kk == k) {
                assert!((gap - lambda).abs() <= 1e-9, "k={k}");
            }
        }
    }

    #[test]
    fn dyadic_restrictions_of_the_block_reversal_average_keep_the_gap() {
        // Restrict to a dyadic block, project onto its two halves: the
        // two-state chain that drives the recursive gap bound.
        let k = 4u32;
        let n = 1usize << k;
        let (pda, pi) = block_reversal_average(k).unwrap();
        let bound = 1.0 / ((k + 1) as f64).powi(2);
        for j in 2..=k {
            let len = 1usize << j;
            for start in [0, n - len] {
                let block: Vec<usize> = (start..start + len).collect();
                let (restricted, restricted_pi) =
                    restriction_chain(&pda, &pi, &block).unwrap();
                let halves = vec![
                    (0..len / 2).collect::<Vec<_>>(),
                    (len / 2..len).collect::<Vec<_>>(),
                ];
                let (projected, projected_pi) =
                    projection_chain(&restricted, &restricted_pi, &halves).unwrap();
                let gap = spectral_report(&projected, &projected_pi).unwrap().lambda;
                assert!(gap >= bound, "j={j} start={start}: {gap} < {bound}");
            }
        }
    }

    #[test]
    fn power_map_inverse_follows_the_exponent_inverse() {
        // f(x) = 3·x⁷ on Z/11; 7·3 ≡ 1 (mod 10) and 3⁻¹ = 4 (mod 11), so the
        // inverse is x ↦ (4x)³ = 4³·x³.
        let f = power_perm(11, 3, 7).unwrap();
        let f_inv = power_perm(11, mod_pow(4, 3, 11), 3).unwrap();
        assert!(f.then(&f_inv).is_identity());
        assert!(f_inv.then(&f).is_identity());
        assert_eq!(f.inverse(), f_inv);
    }

    #[test]
    fn power_map_generators_close_to_the_full_affine_group() {
        // Order (n−1)·φ(n−1): multiplications by units, composed with the
        // power maps on exponent units.
        let gens = named_group(&GroupSpec::PowerMap { n: 11 }).unwrap();
        let group = FiniteGroup::close_generators(&gens, DEFAULT_GROUP_CAP).unwrap();
        assert_eq!(group.order(), 40);
        let small = named_group(&GroupSpec::PowerMap { n: 3 }).unwrap();
        assert_eq!(FiniteGroup::close_generators(&small, DEFAULT_GROUP_CAP).unwrap().order(), 2);
        assert!(named_group(&GroupSpec::PowerMap { n: 9 }).is_err());
    }

    #[test]
    fn modular_multiplication_generates_the_expected_cycle() {
        let gens = named_group(&GroupSpec::ModMult { n: 5, a: 2 }).unwrap();
        let group = FiniteGroup::close_generators(&gens, DEFAULT_GROUP_CAP).unwrap();
        assert_eq!(group.order(), 4);
        assert!(named_group(&GroupSpec::ModMult { n: 6, a: 3 }).is_err());
    }

    #[test]
    fn projection_collapses_the_four_cycle_onto_a_fair_coin() {
        let (p, pi) = named_model(&ModelSpec::SrwCycle { n: 4 }).unwrap();
        let blocks = vec![vec![0, 1], vec![2, 3]];
        let (projected, projected_pi) = projection_chain(&p, &pi, &blocks).unwrap();
        assert!(max_row_dev(&projected, &[vec![0.5, 0.5], vec![0.5, 0.5]]) <= 1e-15);
        assert!((projected_pi.get(0) - 0.5).abs() <= 1e-15);
        assert!(projected.reversible_verified());
    }

    #[test]
    fn projection_rejects_non_partitions() {
        let (p, pi) = named_model(&ModelSpec::SrwCycle { n: 4 }).unwrap();
        assert!(projection_chain(&p, &pi, &[vec![0, 1], vec![1, 2, 3]]).is_err());
        assert!(projection_chain(&p, &pi, &[vec![0, 1], vec![2]]).is_err());
        assert!(projection_chain(&p, &pi, &[vec![0, 1], vec![2, 3, 4]]).is_err());
    }

    #[test]
    fn restriction_folds_escape_mass_onto_the_diagonal() {
        let (p, pi) = named_model(&ModelSpec::SrwCycle { n: 4 }).unwrap();
        let (restricted, restricted_pi) = restriction_chain(&p, &pi, &[0, 1]).unwrap();
        assert!(max_row_dev(&restricted, &[vec![0.5, 0.5], vec![0.5, 0.5]]) <= 1e-15);
        assert!((restricted_pi.get(0) - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn restriction_requires_reversibility() {
        let (k, pi) = named_model(&ModelSpec::Cdg { n: 5, a: 2 }).unwrap();
        match restriction_chain(&k, &pi, &[0, 1, 2]) {
            Err(Error::HypothesisViolated(_)) => {}
            other => panic!("expected a reversibility failure, got {other:?}"),
        }
    }

    #[test]
    fn extended_model_round_trips_its_flattening() {
        let joint = Distribution::uniform(12);
        let model = ExtendedModel::new(3, 4, joint).unwrap();
        for flat in 0..12 {
            let (b, a) = model.split(flat);
            assert_eq!(model.flat(b, a), flat);
        }
        assert!(model.base_marginal().max_deviation(&Distribution::uniform(3)) <= 1e-15);
        assert!(model.aux_marginal().max_deviation(&Distribution::uniform(4)) <= 1e-15);
        assert!(ExtendedModel::new(3, 5, Distribution::uniform(12)).is_err());
    }

    #[test]
    fn swendsen_wang_single_edge_matches_the_frozen_laws() {
        let sw = swendsen_wang_model(2, &[(0, 1)], 2, 0.8).unwrap();
        let q_e = 0.5506710358827784;
        assert!((sw.bond_refresh().entry(sw.flat(0, 0), sw.flat(0, 1)) - q_e).abs() <= 1e-12);

        let joint = [
            0.15501275943619378,
            0.18997448112761245,
            0.15501275943619378,
            0.0,
            0.15501275943619378,
            0.0,
            0.15501275943619378,
            0.18997448112761245,
        ];
        for (z, &w) in joint.iter().enumerate() {
            assert!((sw.joint().get(z) - w).abs() <= 1e-12, "state {z}");
        }

        let marginal = [
            0.34498724056380625,
            0.15501275943619378,
            0.15501275943619378,
            0.34498724056380625,
        ];
        let spin_marginal = sw.spin_marginal();
        for (s, &w) in marginal.iter().enumerate() {
            assert!((spin_marginal.get(s) - w).abs() <= 1e-12, "spin {s}");
        }

        let aligned = vec![
            0.3876677589706946,
            0.11233224102930539,
            0.11233224102930539,
            0.3876677589706946,
        ];
        let split = vec![0.25, 0.25, 0.25, 0.25];
        let oracle_rows = vec![aligned.clone(), split.clone(), split, aligned];
        assert!(max_row_dev(sw.spin_oracle(), &oracle_rows) <= 1e-12);
        assert!(sw.spin_oracle().reversible_verified());
        assert!(sw.joint_step().stationary_verified());
    }

    #[test]
    fn swendsen_wang_spin_marginal_is_the_potts_gibbs_law() {
        let sites = 3;
        let edges = [(0, 1), (1, 2), (0, 2)];
        let sw = swendsen_wang_model(sites, &edges, 2, 0.7).unwrap();
        let h = potts_hamiltonian(sites, &edges, 2).unwrap();
        let potts = gibbs(&GibbsSpec::new(h, 0.7).unwrap());
        assert!(sw.spin_marginal().max_deviation(&potts) <= 1e-12);
    }

    #[test]
    fn swendsen_wang_resample_equals_the_relabeling_fibre_average() {
        // Brute-force check of the conditional-law shortcut: average over
        // the full group of per-site spin relabelings, Q(z, z') =
        // Σ_{g·z = z'} π̃(z') / Σ_g π̃(g·z), with frozen rows where the
        // orbit carries no mass.
        for (sites, q, beta) in [(2usize, 2usize, 0.8), (2, 3, 0.5)] {
            let edges = [(0, 1)];
            let sw = swendsen_wang_model(sites, &edges, q, beta).unwrap();
            let n_spin = sw.extended().base_size();
            let n_bond = sw.extended().aux_size();
            let total = n_spin * n_bond;
            let relabelings = all_permutations(q);
            let mut site_choices = vec![0usize; sites];
            let mut flat_perms = Vec::new();
            loop {
                let mut map = vec![0usize; total];
                for s in 0..n_spin {
                    let spins = sw.spin_config(s);
                    let relabeled: Vec<usize> = spins
                        .iter()
                        .zip(&site_choices)
                        .map(|(&spin, &choice)| relabelings[choice][spin])
                        .collect();
                    let s_new = sw.spin_index(&relabeled);
                    for b in 0..n_bond {
                        map[sw.flat(s, b)] = sw.flat(s_new, b);
                    }
                }
                flat_perms.push(Perm::new(map).unwrap());
                let mut i = 0;
                loop {
                    if i == sites {
                        break;
                    }
                    site_choices[i] += 1;
                    if site_choices[i] < relabelings.len() {
                        break;
                    }
                    site_choices[i] = 0;
                    i += 1;
                }
                if i == sites {
                    break;
                }
            }
            for z in 0..total {
                let orbit_mass: f64 =
                    flat_perms.iter().map(|g| sw.joint().get(g.apply(z))).sum();
                for z_next in 0..total {
                    let expected = if orbit_mass == 0.0 {
                        f64::from(u8::from(z_next == z))
                    } else {
                        let hits =
                            flat_perms.iter().filter(|g| g.apply(z) == z_next).count();
                        hits as f64 * sw.joint().get(z_next) / orbit_mass
                    };
                    assert!(
                        (sw.spin_resample().entry(z, z_next) - expected).abs() <= 1e-12,
                        "sites={sites} q={q}: {z} -> {z_next}"
                    );
                }
            }
        }
    }

    #[test]
    fn swendsen_wang_at_infinite_temperature_respins_uniformly() {
        let sw = swendsen_wang_model(2, &[(0, 1)], 2, 0.0).unwrap();
        for s in 0..4 {
            let z = sw.flat(s, 0);
            assert!(sw.joint().get(z) > 0.0);
            for s_next in 0..4 {
                assert!((sw.joint_step().entry(z, sw.flat(s_next, 0)) - 0.25).abs() <= 1e-15);
                assert!((sw.spin_oracle().entry(s, s_next) - 0.25).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn swendsen_wang_rejects_oversized_and_malformed_graphs() {
        assert!(swendsen_wang_model(13, &[], 2, 0.5).is_err());
        assert!(swendsen_wang_model(2, &[(0, 2)], 2, 0.5).is_err());
        assert!(swendsen_wang_model(2, &[(1, 1)], 2, 0.5).is_err());
        assert!(swendsen_wang_model(2, &[(0, 1)], 1, 0.5).is_err());
        assert!(swendsen_wang_model(2, &[(0, 1)], 2, -1.0).is_err());
    }

    fn pt_example() -> (ObsFunction, Vec<f64>, MarkovKernel) {
        let h = ObsFunction::new(vec![0.0, 1.0, 2.5]).unwrap();
        let (proposal, _) = named_model(&ModelSpec::SrwCycle { n: 3 }).unwrap();
        (h, vec![0.5, 1.0], proposal)
    }

    #[test]
    fn parallel_tempering_matches_the_direct_enumeration() {
        let (h, betas, proposal) = pt_example();
        let pt = parallel_tempering_model(&h, &betas, &proposal).unwrap();
        let direct = parallel_tempering_direct(&h, &betas, &proposal).unwrap();
        assert!(pt.composite().max_abs_diff(&direct) <= 1e-10);
        assert_eq!(pt.assignments(), &[vec![0, 1], vec![1, 0]]);
        assert!(pt.level().reversible_verified());
        assert!(pt.swap().reversible_verified());
        assert!(pt.reversible().reversible_verified());
        assert!(pt.composite().stationary_verified());
    }

    #[test]
    fn parallel_tempering_matches_the_frozen_anchors() {
        let (h, betas, proposal) = pt_example();
        let pt = parallel_tempering_model(&h, &betas, &proposal).unwrap();
        let k = pt.composite();
        let anchors = [
            (0usize, 0usize, 0.6642500259079589),
            (0, 2, 0.09196986029286058),
            (0, 6, 0.15163266492815836),
            (0, 4, 0.020521249655974697),
            (13, 5, 0.2767411358567941),
        ];
        for (x, y, v) in anchors {
            assert!((k.entry(x, y) - v).abs() <= 1e-12, "entry ({x}, {y})");
        }
        // The stay branch at the target vanishes because the swap there is
        // always accepted.
        assert!(k.entry(10, 4).abs() <= 1e-15);
        let joint = [
            (0usize, 0.18216037204424448),
            (10, 0.009069230896882332),
            (13, 0.014952633888580702),
        ];
        for (z, v) in joint {
            assert!((pt.joint().get(z) - v).abs() <= 1e-12, "state {z}");
        }
        assert_eq!(pt.state_index(&[2, 0], 1), 13);
        assert_eq!(pt.state_config(13), (vec![2, 0], 1));
    }

    #[test]
    fn parallel_tempering_with_one_temperature_is_the_level_move() {
        let h = ObsFunction::new(vec![0.0, 1.0, 2.5]).unwrap();
        let (proposal, _) = named_model(&ModelSpec::SrwCycle { n: 3 }).unwrap();
        let pt = parallel_tempering_model(&h, &[0.7], &proposal).unwrap();
        assert!(pt.swap().max_abs_diff(&MarkovKernel::identity(3)) <= 1e-15);
        assert!(pt.composite().max_abs_diff(pt.level()) <= 1e-15);
        let mover =
            metropolis_hastings(&proposal, &gibbs(&GibbsSpec::new(h, 0.7).unwrap())).unwrap();
        assert!(pt.level().max_abs_diff(&mover) <= 1e-15);
    }

    #[test]
    fn parallel_tempering_swaps_surely_at_equal_temperatures() {
        let h = ObsFunction::new(vec![0.0, 1.0]).unwrap();
        let (proposal, _) = named_model(&ModelSpec::SrwCycle { n: 2 }).unwrap();
        let pt = parallel_tempering_model(&h, &[0.6, 0.6], &proposal).unwrap();
        for z in 0..pt.joint().n() {
            let (mut values, a) = pt.state_config(z);
            values.swap(0, 1);
            let swapped = pt.state_index(&values, a);
            assert!((pt.swap().entry(z, swapped) - 1.0).abs() <= 1e-15, "state {z}");
        }
    }

    #[test]
    fn parallel_tempering_rejects_oversized_ladders() {
        let h = ObsFunction::new(vec![0.0, 1.0, 2.5]).unwrap();
        let (proposal, _) = named_model(&ModelSpec::SrwCycle { n: 3 }).unwrap();
        let betas = vec![0.5; 5];
        match parallel_tempering_model(&h, &betas, &proposal) {
            Err(Error::TooLarge { .. }) => {}
            other => panic!("expected a size cap, got {other:?}"),
        }
    }

    #[test]
    fn permutations_enumerate_lexicographically() {
        assert_eq!(
            all_permutations(3),
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0],
            ]
        );
        assert_eq!(all_permutations(1), vec![vec![0]]);
    }
}
