//! Markov kernels and the π-weighted linear algebra around them.
//!
//! A kernel is a dense row-stochastic matrix `P`; it acts on observables by
//! `P[f](x) = Σ_y P(x,y) f(y)` and on distributions from the left. The adjoint
//! (time reversal) with respect to π is `P*(x,y) = π(y) P(y,x) / π(x)`, so that
//! `⟨P f, h⟩_π = ⟨f, P* h⟩_π`.

use nalgebra::DMatrix;

use crate::error::Error;
use crate::space::{Distribution, ObsFunction};
use crate::tol;
use crate::Result;

/// A dense row-stochastic matrix over `0..n`, with optional cached
/// certifications against a stationary distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovKernel {
    m: DMatrix<f64>,
    stationary: Option<Distribution>,
    stationary_verified: bool,
    reversible_verified: bool,
}

impl MarkovKernel {
    /// Validates row sums (within [`tol::STOCHASTIC`]) and entry signs;
    /// negative dust above `-`[`tol::ENTRY_CLIP`] is clipped to zero.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch { expected: m.nrows().max(1), got: m.ncols() });
        }
        let mut m = m;
        for r in 0..m.nrows() {
            let mut sum = 0.0;
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if !v.is_finite() {
                    return Err(Error::NonFinite { context: "kernel entry" });
                }
                if v < -tol::ENTRY_CLIP {
                    return Err(Error::NegativeEntry { row: r, col: c, value: v });
                }
                if v < 0.0 {
                    m[(r, c)] = 0.0;
                }
                sum += m[(r, c)];
            }
            if (sum - 1.0).abs() > tol::STOCHASTIC {
                return Err(Error::RowSum { row: r, sum, tol: tol::STOCHASTIC });
            }
        }
        Ok(Self { m, stationary: None, stationary_verified: false, reversible_verified: false })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
        }
        let m = DMatrix::from_fn(n, n, |r, c| rows[r][c]);
        Self::new(m)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: DMatrix::identity(n, n),
            stationary: None,
            stationary_verified: false,
            reversible_verified: false,
        }
    }

    /// Attaches π after verifying stationarity (and caching reversibility).
    pub fn with_stationary(mut self, pi: &Distribution) -> Result<Self> {
        let residual = stationarity_residual(&self, pi)?;
        if residual > tol::STOCHASTIC {
            return Err(Error::NotStationary { residual });
        }
        self.reversible_verified = is_reversible(&self, pi)?;
        self.stationary = Some(pi.clone());
        self.stationary_verified = true;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.m[(x, y)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn stationary(&self) -> Option<&Distribution> {
        self.stationary.as_ref()
    }

    pub fn stationary_verified(&self) -> bool {
        self.stationary_verified
    }

    pub fn reversible_verified(&self) -> bool {
        self.reversible_verified
    }

    /// `P[f](x) = Σ_y P(x,y) f(y)`.
    pub fn apply(&self, f: &ObsFunction) -> Result<ObsFunction> {
        if f.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: f.n() });
        }
        ObsFunction::from_vector(&self.m * f.vector())
    }

    /// One-step evolution of a distribution: `(μP)(y) = Σ_x μ(x) P(x,y)`.
    pub fn evolve(&self, mu: &Distribution) -> Result<Distribution> {
        if mu.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: mu.n() });
        }
        let row = mu.vector().transpose() * &self.m;
        Distribution::new(row.iter().copied().collect())
    }

    /// Largest absolute entrywise difference to another kernel.
    pub fn max_abs_diff(&self, other: &MarkovKernel) -> f64 {
        (&self.m - &other.m).abs().max()
    }
}

/// `⟨f, h⟩_π = Σ_x π(x) f(x) h(x)`.
pub fn weighted_inner(f: &ObsFunction, h: &ObsFunction, pi: &Distribution) -> Result<f64> {
    let n = pi.n();
    if f.n() != n || h.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.n().max(h.n()) });
    }
    Ok((0..n).map(|x| pi.get(x) * f.get(x) * h.get(x)).sum())
}

/// π-weighted L² norm `‖f‖_π = √⟨f,f⟩_π`.
pub fn weighted_norm(f: &ObsFunction, pi: &Distribution) -> Result<f64> {
    Ok(weighted_inner(f, f, pi)?.max(0.0).sqrt())
}

/// Residual `‖πP − π‖_∞` of the stationarity identity.
pub fn stationarity_residual(p: &MarkovKernel, pi: &Distribution) -> Result<f64> {
    if pi.n() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: pi.n() });
    }
    let row = pi.vector().transpose() * p.matrix();
    Ok((0..p.n()).map(|y| (row[y] - pi.get(y)).abs()).fold(0.0, f64::max))
}

/// Residual `max_{x,y} |π(x)P(x,y) − π(y)P(y,x)|` of detailed balance.
pub fn reversibility_residual(p: &MarkovKernel, pi: &Distribution) -> Result<f64> {
    if pi.n() != p.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: pi.n() });
    }
    let n = p.n();
    let mut worst = 0.0f64;
    for x in 0..n {
        for y in (x + 1)..n {
            let d = (pi.get(x) * p.entry(x, y) - pi.get(y) * p.entry(y, x)).abs();
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// `πP = π` within [`tol::STOCHASTIC`].
pub fn is_stationary(p: &MarkovKernel, pi: &Distribution) -> Result<bool> {
    Ok(stationarity_residual(p, pi)? <= tol::STOCHASTIC)
}

/// Detailed balance `π(x)P(x,y) = π(y)P(y,x)` within [`tol::STOCHASTIC`].
pub fn is_reversible(p: &MarkovKernel, pi: &Distribution) -> Result<bool> {
    Ok(reversibility_residual(p, pi)? <= tol::STOCHASTIC)
}

/// Time reversal `P*(x,y) = π(y) P(y,x) / π(x)`. Requires strictly positive π
/// and a π-stationary `P` (stationarity is what makes `P*` row-stochastic).
pub fn adjoint(p: &MarkovKernel, pi: &Distribution) -> Result<MarkovKernel> {
    pi.require_positive()?;
    let residual = stationarity_residual(p, pi)?;
    if residual > tol::STOCHASTIC {
        return Err(Error::NotStationary { residual });
    }
    let n = p.n();
    let m = DMatrix::from_fn(n, n, |x, y| pi.get(y) * p.entry(y, x) / pi.get(x));
    MarkovKernel::new(m)
}

/// Matrix product `PM` (first step `P`, then `M`).
pub fn compose(p: &MarkovKernel, m: &MarkovKernel) -> Result<MarkovKernel> {
    if p.n() != m.n() {
        return Err(Error::DimensionMismatch { expected: p.n(), got: m.n() });
    }
    MarkovKernel::new(p.matrix() * m.matrix())
}

/// Convex combination `Σ w_i K_i`; weights must be nonnegative and sum to 1.
pub fn mixture(weights: &[f64], kernels: &[&MarkovKernel]) -> Result<MarkovKernel> {
    if weights.len() != kernels.len() || kernels.is_empty() {
        return Err(Error::DimensionMismatch { expected: weights.len().max(1), got: kernels.len() });
    }
    if let Some(&w) = weights.iter().find(|&&w| w < 0.0) {
        return Err(Error::InvalidParameter(format!("negative mixture weight {w}")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > tol::STOCHASTIC {
        return Err(Error::NotADistribution { sum, tol: tol::STOCHASTIC });
    }
    let n = kernels[0].n();
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for (&w, k) in weights.iter().zip(kernels) {
        if k.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: k.n() });
        }
        acc += k.matrix() * w;
    }
    MarkovKernel::new(acc)
}

/// The rank-1 projector Π: every row equals π. Idempotent and π-reversible.
pub fn stationary_projector(pi: &Distribution) -> MarkovKernel {
    let n = pi.n();
    let m = DMatrix::from_fn(n, n, |_, y| pi.get(y));
    MarkovKernel {
        m,
        stationary: Some(pi.clone()),
        stationary_verified: true,
        reversible_verified: true,
    }
}

/// Lazy version `(I + P)/2`; pushes the symmetrized spectrum into `[0, 1]`.
pub fn lazy(p: &MarkovKernel) -> MarkovKernel {
    let n = p.n();
    let mut m = p.matrix() * 0.5;
    for x in 0..n {
        m[(x, x)] += 0.5;
    }
    MarkovKernel {
        m,
        stationary: p.stationary.clone(),
        stationary_verified: p.stationary_verified,
        reversible_verified: p.reversible_verified,
    }
}

/// `t`-step kernel `P^t` by repeated squaring.
pub fn power(p: &MarkovKernel, t: usize) -> Result<MarkovKernel> {
    let n = p.n();
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut base = p.matrix().clone();
    let mut t = t;
    while t > 0 {
        if t & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        t >>= 1;
    }
    MarkovKernel::new(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(rows: &[&[f64]]) -> MarkovKernel {
        MarkovKernel::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(MarkovKernel::from_rows(&[vec![0.5, 0.4], vec![0.5, 0.5]]).is_err());
        assert!(MarkovKernel::from_rows(&[vec![1.1, -0.1], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn weighted_inner_examples() {
        let pi = Distribution::uniform(2);
        let ones = ObsFunction::constant(2, 1.0);
        assert_eq!(weighted_inner(&ones, &ones, &pi).unwrap(), 1.0);

        let f = ObsFunction::new(vec![1.0, -1.0]).unwrap();
        let h = ObsFunction::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(weighted_inner(&f, &h, &pi).unwrap(), 0.0);

        // direct summation: 0.3·1·2 + 0.7·2·1 = 2.0
        let pi = Distribution::new(vec![0.3, 0.7]).unwrap();
        let f = ObsFunction::new(vec![1.0, 2.0]).unwrap();
        let h = ObsFunction::new(vec![2.0, 1.0]).unwrap();
        assert!((weighted_inner(&f, &h, &pi).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn adjoint_of_reversible_is_itself_and_uniform_is_transpose() {
        let p = kernel(&[&[0.7, 0.3], &[0.3, 0.7]]);
        let pi = Distribution::uniform(2);
        let adj = adjoint(&p, &pi).unwrap();
        assert!(p.max_abs_diff(&adj) < 1e-15);

        let p = kernel(&[&[0.2, 0.8, 0.0], &[0.1, 0.2, 0.7], &[0.7, 0.0, 0.3]]);
        // uniform is stationary only for doubly stochastic matrices; this one is.
        let pi = Distribution::uniform(3);
        let adj = adjoint(&p, &pi).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                assert!((adj.entry(x, y) - p.entry(y, x)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn adjoint_is_an_involution() {
        let p = kernel(&[&[0.6, 0.3, 0.1], &[0.2, 0.7, 0.1], &[0.1, 0.3, 0.6]]);
        // stationary law of this chain, found by solving πP = π.
        let pi = stationary_of(&p);
        let back = adjoint(&adjoint(&p, &pi).unwrap(), &pi).unwrap();
        assert!(p.max_abs_diff(&back) < 1e-12);
    }

    #[test]
    fn adjoint_moves_inner_products() {
        let p = kernel(&[&[0.6, 0.3, 0.1], &[0.2, 0.7, 0.1], &[0.1, 0.3, 0.6]]);
        let pi = stationary_of(&p);
        let f = ObsFunction::new(vec![0.3, -1.2, 2.0]).unwrap();
        let h = ObsFunction::new(vec![1.5, 0.4, -0.7]).unwrap();
        let lhs = weighted_inner(&p.apply(&f).unwrap(), &h, &pi).unwrap();
        let rhs = weighted_inner(&f, &adjoint(&p, &pi).unwrap().apply(&h).unwrap(), &pi).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    fn stationary_of(p: &MarkovKernel) -> Distribution {
        // power iteration is plenty for tiny ergodic test matrices
        let mut mu = Distribution::uniform(p.n());
        for _ in 0..10_000 {
            mu = p.evolve(&mu).unwrap();
        }
        mu
    }

    #[test]
    fn compose_against_triple_sum() {
        let p = kernel(&[&[0.6, 0.3, 0.1], &[0.2, 0.7, 0.1], &[0.1, 0.3, 0.6]]);
        let m = kernel(&[&[0.1, 0.5, 0.4], &[0.3, 0.3, 0.4], &[0.25, 0.25, 0.5]]);
        let pm = compose(&p, &m).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                let direct: f64 = (0..3).map(|z| p.entry(x, z) * m.entry(z, y)).sum();
                assert!((pm.entry(x, y) - direct).abs() < 1e-15);
            }
        }
        let id = MarkovKernel::identity(3);
        assert!(compose(&p, &id).unwrap().max_abs_diff(&p) < 1e-15);
    }

    #[test]
    fn projector_absorbs_stationary_kernels() {
        let p = kernel(&[&[0.6, 0.3, 0.1], &[0.2, 0.7, 0.1], &[0.1, 0.3, 0.6]]);
        let pi = stationary_of(&p);
        let proj = stationary_projector(&pi);
        assert!(compose(&proj, &p).unwrap().max_abs_diff(&proj) < 1e-9);
        assert!(compose(&proj, &proj).unwrap().max_abs_diff(&proj) < 1e-15);
        assert!(is_reversible(&proj, &pi).unwrap());
    }

    #[test]
    fn mixture_entrywise() {
        let a = kernel(&[&[0.9, 0.1], &[0.4, 0.6]]);
        let b = kernel(&[&[0.1, 0.9], &[0.8, 0.2]]);
        let m = mixture(&[0.25, 0.75], &[&a, &b]).unwrap();
        assert!((m.entry(0, 0) - (0.25 * 0.9 + 0.75 * 0.1)).abs() < 1e-15);
        assert!(mixture(&[0.5, 0.4], &[&a, &b]).is_err());
        assert!(mixture(&[-0.1, 1.1], &[&a, &b]).is_err());
    }

    #[test]
    fn additive_reversiblization_is_reversible() {
        let p = kernel(&[&[0.6, 0.3, 0.1], &[0.2, 0.7, 0.1], &[0.1, 0.3, 0.6]]);
        let pi = stationary_of(&p);
        let rev = mixture(&[0.5, 0.5], &[&p, &adjoint(&p, &pi).unwrap()]).unwrap();
        assert!(reversibility_residual(&rev, &pi).unwrap() < 1e-12);
    }

    #[test]
    fn lazy_diagonal() {
        let pi = Distribution::new(vec![0.3, 0.7]).unwrap();
        let l = lazy(&stationary_projector(&pi));
        assert!((l.entry(0, 0) - (0.5 + 0.15)).abs() < 1e-15);
        assert!((l.entry(1, 1) - (0.5 + 0.35)).abs() < 1e-15);
        let id = MarkovKernel::identity(4);
        assert!(lazy(&id).max_abs_diff(&id) < 1e-15);
    }

    #[test]
    fn power_matches_iterated_product() {
        let p = kernel(&[&[0.6, 0.3, 0.1], &[0.2, 0.7, 0.1], &[0.1, 0.3, 0.6]]);
        let mut iter = MarkovKernel::identity(3);
        for _ in 0..13 {
            iter = compose(&iter, &p).unwrap();
        }
        assert!(power(&p, 13).unwrap().max_abs_diff(&iter) < 1e-12);
        assert!(power(&p, 0).unwrap().max_abs_diff(&MarkovKernel::identity(3)) < 1e-15);
    }
}
