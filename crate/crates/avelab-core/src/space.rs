//! State spaces, probability distributions, and observables.
//!
//! All mathematics indexes states as `0..n`; labels are display metadata only.

use nalgebra::DVector;

use crate::error::Error;
use crate::tol;
use crate::Result;

/// A finite state space: a size plus optional display labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    n: usize,
    labels: Option<Vec<String>>,
}

impl StateSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("state space must be nonempty".into()));
        }
        Ok(Self { n, labels: None })
    }

    /// Labeled space; labels must be distinct and one per state.
    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidParameter("state space must be nonempty".into()));
        }
        let mut seen = labels.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != n {
            return Err(Error::InvalidParameter("state labels must be distinct".into()));
        }
        Ok(Self { n, labels: Some(labels) })
    }

    /// The signed interval `-n..=n` (2n+1 states); state `x` sits at index `x + n`.
    pub fn signed_interval(n: i64) -> Self {
        let labels = (-n..=n).map(|x| x.to_string()).collect();
        Self {
            n: (2 * n + 1) as usize,
            labels: Some(labels),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Display label for a state (its index when unlabeled).
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => i.to_string(),
        }
    }
}

/// A probability vector over `0..n`. Entries are nonnegative and sum to 1
/// within [`tol::DISTRIBUTION`]. Operations that divide by weights (adjoints,
/// KL, state-dependent averaging) additionally require strict positivity.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    w: DVector<f64>,
}

impl Distribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty distribution".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFinite { context: "distribution weight" });
            }
            if w < -tol::ENTRY_CLIP {
                return Err(Error::NegativeEntry { row: 0, col: i, value: w });
            }
        }
        let mut w = DVector::from_vec(weights);
        w.iter_mut().for_each(|x| {
            if *x < 0.0 {
                *x = 0.0;
            }
        });
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > tol::DISTRIBUTION {
            return Err(Error::NotADistribution { sum, tol: tol::DISTRIBUTION });
        }
        Ok(Self { w })
    }

    /// Normalizes nonnegative weights with positive total mass.
    pub fn from_unnormalized(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cannot normalize weights with total mass {sum}"
            )));
        }
        Self::new(weights.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            w: DVector::from_element(n, 1.0 / n as f64),
        }
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.w[i]
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.w
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.w.iter().copied()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.w.iter().all(|&x| x > 0.0)
    }

    /// Errors with the offending state unless every weight is positive.
    pub fn require_positive(&self) -> Result<()> {
        match self.w.iter().position(|&x| x <= 0.0) {
            Some(state) => Err(Error::ZeroMassState { state }),
            None => Ok(()),
        }
    }

    /// Total mass of a set of states.
    pub fn mass(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.w[i]).sum()
    }

    /// Entrywise maximum deviation from another distribution.
    pub fn max_deviation(&self, other: &Distribution) -> f64 {
        (&self.w - &other.w).abs().max()
    }
}

/// A real-valued observable `f : {0..n-1} -> R`, an element of `L^2(π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsFunction {
    v: DVector<f64>,
}

impl ObsFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { context: "observable value" });
        }
        Ok(Self { v: DVector::from_vec(values) })
    }

    pub fn from_vector(v: DVector<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { context: "observable value" });
        }
        Ok(Self { v })
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self { v: DVector::from_element(n, c) }
    }

    /// Indicator of a set of states.
    pub fn indicator(n: usize, set: &[usize]) -> Self {
        let mut v = DVector::zeros(n);
        for &i in set {
            v[i] = 1.0;
        }
        Self { v }
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.v[i]
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.v
    }

    pub fn values(&self) -> Vec<f64> {
        self.v.iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_rejects_bad_sums() {
        assert!(Distribution::new(vec![0.5, 0.4]).is_err());
        assert!(Distribution::new(vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn distribution_clips_dust_but_rejects_real_negatives() {
        let d = Distribution::new(vec![1.0 + 5e-15, -5e-15]).unwrap();
        assert_eq!(d.get(1), 0.0);
        assert!(Distribution::new(vec![1.001, -0.001]).is_err());
    }

    #[test]
    fn signed_interval_indexing() {
        let s = StateSpace::signed_interval(3);
        assert_eq!(s.n(), 7);
        assert_eq!(s.label(0), "-3");
        assert_eq!(s.label(6), "3");
        assert_eq!(s.label(3), "0");
    }

    #[test]
    fn positivity_check_names_the_state() {
        let d = Distribution::new(vec![0.0, 1.0]).unwrap();
        match d.require_positive() {
            Err(Error::ZeroMassState { state }) => assert_eq!(state, 0),
            other => panic!("expected zero-mass error, got {other:?}"),
        }
    }

    #[test]
    fn labels_must_be_distinct() {
        assert!(StateSpace::with_labels(vec!["a".into(), "a".into()]).is_err());
    }
}
