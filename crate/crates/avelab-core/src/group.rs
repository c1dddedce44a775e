//! Finite permutation groups acting on the state space, their deterministic
//! kernels `U_g`, and finitely supported pair measures on `G × G`.
//!
//! Composition convention, fixed crate-wide: the matrix product
//! `perm_kernel(g) · perm_kernel(h)` is the kernel of the pointwise
//! composition `x ↦ h(g(x))`, i.e. "apply `g`, then `h`" — see
//! [`Perm::then`]. Equivalently `(U_g U_h)[f](x) = f(h(g(x)))`.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::Error;
use crate::kernel::MarkovKernel;
use crate::space::Distribution;
use crate::tol;
use crate::Result;

/// Default ceiling for explicit group enumeration; larger groups must be used
/// through generator-supported pair measures instead.
pub const DEFAULT_GROUP_CAP: usize = 10_000;

/// A bijection of `0..n`, stored as `map[x] = g·x`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Perm {
    map: Vec<usize>,
}

impl Perm {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &y in &map {
            if y >= n || seen[y] {
                return Err(Error::NotBijective { n });
            }
            seen[y] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self { map: (0..n).collect() }
    }

    pub fn n(&self) -> usize {
        self.map.len()
    }

    pub fn apply(&self, x: usize) -> usize {
        self.map[x]
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &y)| i == y)
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.map.len()];
        for (x, &y) in self.map.iter().enumerate() {
            inv[y] = x;
        }
        Perm { map: inv }
    }

    /// `self.then(other)` sends `x ↦ other(self(x))`; matches the matrix
    /// product `perm_kernel(self) · perm_kernel(other)`.
    pub fn then(&self, other: &Perm) -> Perm {
        debug_assert_eq!(self.n(), other.n());
        Perm { map: self.map.iter().map(|&y| other.map[y]).collect() }
    }
}

/// The deterministic kernel `U_g` with `U_g(x, y) = 1` iff `y = g·x`.
/// Acts on observables by `U_g[f](x) = f(g·x)`.
pub fn perm_kernel(g: &Perm) -> MarkovKernel {
    let n = g.n();
    let mut m = DMatrix::zeros(n, n);
    for x in 0..n {
        m[(x, g.apply(x))] = 1.0;
    }
    MarkovKernel::new(m).expect("permutation matrices are row-stochastic")
}

/// A finite permutation group stored by explicit element list.
/// Element 0 is the identity; composition and inverses are index lookups.
#[derive(Debug, Clone)]
pub struct FiniteGroup {
    elems: Vec<Perm>,
    lookup: HashMap<Perm, usize>,
    inverse: Vec<usize>,
}

impl FiniteGroup {
    /// Builds a group from an element list, verifying the group axioms by
    /// table scan. The identity need not be listed first in the input.
    pub fn from_elements(elems: Vec<Perm>) -> Result<Self> {
        if elems.is_empty() {
            return Err(Error::NotAGroup { reason: "empty element list".into() });
        }
        let n = elems[0].n();
        if elems.iter().any(|g| g.n() != n) {
            return Err(Error::NotAGroup { reason: "elements act on different spaces".into() });
        }
        let mut elems = elems;
        let id_pos = elems
            .iter()
            .position(Perm::is_identity)
            .ok_or_else(|| Error::NotAGroup { reason: "identity missing".into() })?;
        elems.swap(0, id_pos);

        let mut lookup = HashMap::with_capacity(elems.len());
        for (i, g) in elems.iter().enumerate() {
            if lookup.insert(g.clone(), i).is_some() {
                return Err(Error::NotAGroup { reason: "duplicate element".into() });
            }
        }
        let mut inverse = vec![0; elems.len()];
        for (i, g) in elems.iter().enumerate() {
            inverse[i] = *lookup
                .get(&g.inverse())
                .ok_or_else(|| Error::NotAGroup { reason: "missing inverse".into() })?;
        }
        for a in &elems {
            for b in &elems {
                if !lookup.contains_key(&a.then(b)) {
                    return Err(Error::NotAGroup { reason: "not closed under composition".into() });
                }
            }
        }
        Ok(Self { elems, lookup, inverse })
    }

    pub fn trivial(n: usize) -> Self {
        Self::from_elements(vec![Perm::identity(n)]).expect("trivial group is a group")
    }

    /// Breadth-first closure of a generator list under composition and
    /// inverse; errors once more than `cap` elements appear.
    pub fn close_generators(gens: &[Perm], cap: usize) -> Result<Self> {
        if gens.is_empty() {
            return Err(Error::NotAGroup { reason: "no generators".into() });
        }
        let n = gens[0].n();
        if gens.iter().any(|g| g.n() != n) {
            return Err(Error::NotAGroup { reason: "generators act on different spaces".into() });
        }
        let mut elems = vec![Perm::identity(n)];
        let mut seen: HashMap<Perm, usize> = HashMap::new();
        seen.insert(elems[0].clone(), 0);
        let mut frontier = 0;
        while frontier < elems.len() {
            let current = elems[frontier].clone();
            frontier += 1;
            for g in gens.iter().flat_map(|g| [g.clone(), g.inverse()]) {
                let next = current.then(&g);
                if !seen.contains_key(&next) {
                    if elems.len() >= cap {
                        return Err(Error::GroupCapExceeded { cap });
                    }
                    seen.insert(next.clone(), elems.len());
                    elems.push(next);
                }
            }
        }
        Self::from_elements(elems)
    }

    pub fn order(&self) -> usize {
        self.elems.len()
    }

    pub fn space_size(&self) -> usize {
        self.elems[0].n()
    }

    pub fn elem(&self, i: usize) -> &Perm {
        &self.elems[i]
    }

    pub fn elements(&self) -> &[Perm] {
        &self.elems
    }

    pub fn index_of(&self, g: &Perm) -> Option<usize> {
        self.lookup.get(g).copied()
    }

    pub fn inverse_index(&self, i: usize) -> usize {
        self.inverse[i]
    }

    pub fn compose_index(&self, i: usize, j: usize) -> usize {
        self.lookup[&self.elems[i].then(&self.elems[j])]
    }

    /// `π(g·x) = π(x)` for all g, x within [`tol::DISTRIBUTION`].
    pub fn is_pi_invariant(&self, pi: &Distribution) -> bool {
        self.invariance_deviation(pi) <= tol::DISTRIBUTION
    }

    /// Largest `|π(g·x) − π(x)|` over the group.
    pub fn invariance_deviation(&self, pi: &Distribution) -> f64 {
        let mut worst = 0.0f64;
        for g in &self.elems {
            for x in 0..pi.n() {
                worst = worst.max((pi.get(g.apply(x)) - pi.get(x)).abs());
            }
        }
        worst
    }

    /// Orbit partition of the state space, each orbit sorted, orbits ordered
    /// by smallest element. Indicators of orbits span the invariant subspace.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        orbits_under(&self.elems, self.space_size())
    }
}

/// Orbit partition of `{0, …, n−1}` under the group *generated* by the listed
/// permutations; the list need not be closed. Forward closure suffices: each
/// permutation has finite order, so its inverse is reached by iterating it.
pub fn orbits_under(perms: &[Perm], n: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut orbits = Vec::new();
    for x in 0..n {
        if seen[x] {
            continue;
        }
        let mut orbit = vec![x];
        seen[x] = true;
        let mut head = 0;
        while head < orbit.len() {
            let y = orbit[head];
            head += 1;
            for g in perms {
                let z = g.apply(y);
                if !seen[z] {
                    seen[z] = true;
                    orbit.push(z);
                }
            }
        }
        orbit.sort_unstable();
        orbits.push(orbit);
    }
    orbits
}

/// A finitely supported probability measure on pairs of permutations,
/// stored as `(left index, right index, weight)` atoms into a permutation
/// list that need not be a closed group.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMeasure {
    atoms: Vec<(usize, usize, f64)>,
}

impl PairMeasure {
    pub fn new(atoms: Vec<(usize, usize, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidPairMeasure("no atoms".into()));
        }
        let mut sum = 0.0;
        for &(_, _, w) in &atoms {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidPairMeasure(format!("invalid weight {w}")));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > tol::DISTRIBUTION {
            return Err(Error::InvalidPairMeasure(format!("weights sum to {sum}")));
        }
        // merge duplicate atoms; canonical sorted order keeps reductions stable
        let mut merged: HashMap<(usize, usize), f64> = HashMap::new();
        for (g, h, w) in atoms {
            *merged.entry((g, h)).or_insert(0.0) += w;
        }
        let mut atoms: Vec<_> = merged.into_iter().map(|((g, h), w)| (g, h, w)).collect();
        atoms.sort_by_key(|&(g, h, _)| (g, h));
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(usize, usize, f64)] {
        &self.atoms
    }

    pub fn max_index(&self) -> usize {
        self.atoms.iter().map(|&(g, h, _)| g.max(h)).max().unwrap_or(0)
    }

    /// Weight of the atom at `(g, h)` (0 when absent).
    pub fn weight(&self, g: usize, h: usize) -> f64 {
        self.atoms
            .iter()
            .find(|&&(a, b, _)| a == g && b == h)
            .map(|&(_, _, w)| w)
            .unwrap_or(0.0)
    }
}

/// The named pair-measure families from the averaging theory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMeasureKind {
    /// Uniform over `G × G`: the independent-double-average.
    Product,
    /// Uniform over `{(g, g⁻¹)}`: the orbit average.
    Conjugation,
    /// Uniform over `{(g, g)}`: the twisted average.
    Twisted,
    /// Uniform over `{(g, e)}`: the left average.
    Left,
    /// Uniform over `{(e, g)}`: the right average.
    Right,
}

/// Builds the named measure over a closed group (atom indices follow the
/// group's element order).
pub fn pair_measure(group: &FiniteGroup, kind: PairMeasureKind) -> PairMeasure {
    let m = group.order();
    let w = 1.0 / m as f64;
    let atoms = match kind {
        PairMeasureKind::Product => {
            let w2 = w * w;
            (0..m).flat_map(|g| (0..m).map(move |h| (g, h, w2))).collect()
        }
        PairMeasureKind::Conjugation => (0..m).map(|g| (g, group.inverse_index(g), w)).collect(),
        PairMeasureKind::Twisted => (0..m).map(|g| (g, g, w)).collect(),
        PairMeasureKind::Left => (0..m).map(|g| (g, 0, w)).collect(),
        PairMeasureKind::Right => (0..m).map(|g| (0, g, w)).collect(),
    };
    PairMeasure::new(atoms).expect("named measures are valid by construction")
}

/// Distributional symmetry `(g, h) =_D (h⁻¹, g⁻¹)`: every atom `((g,h), w)`
/// must be matched by `((h⁻¹, g⁻¹), w)` within [`tol::DISTRIBUTION`].
pub fn is_measure_symmetric(group: &FiniteGroup, nu: &PairMeasure) -> bool {
    if nu.max_index() >= group.order() {
        return false;
    }
    nu.atoms().iter().all(|&(g, h, w)| {
        let mirrored = nu.weight(group.inverse_index(h), group.inverse_index(g));
        (mirrored - w).abs() <= tol::DISTRIBUTION
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shift(n: usize) -> Perm {
        Perm::new((0..n).map(|x| (x + 1) % n).collect()).unwrap()
    }

    #[test]
    fn perm_validation() {
        assert!(Perm::new(vec![1, 1, 0]).is_err());
        assert!(Perm::new(vec![1, 2, 0]).is_ok());
    }

    #[test]
    fn kernel_of_identity_and_swap() {
        let id = perm_kernel(&Perm::identity(2));
        assert!(id.max_abs_diff(&MarkovKernel::identity(2)) < 1e-15);
        let swap = perm_kernel(&Perm::new(vec![1, 0]).unwrap());
        assert_eq!(swap.entry(0, 1), 1.0);
        assert_eq!(swap.entry(1, 0), 1.0);
        assert_eq!(swap.entry(0, 0), 0.0);
    }

    #[test]
    fn kernel_acts_by_relabeling() {
        // shift g on 5 states: U_g[f](x) = f(g x) = f(x+1 mod 5)
        let g = shift(5);
        let f = crate::space::ObsFunction::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let shifted = perm_kernel(&g).apply(&f).unwrap();
        assert_eq!(shifted.values(), vec![2.0, 3.0, 4.0, 5.0, 1.0]);
    }

    #[test]
    fn kernel_product_matches_then() {
        let a = shift(5);
        let b = Perm::new(vec![0, 2, 1, 4, 3]).unwrap();
        let lhs = crate::kernel::compose(&perm_kernel(&a), &perm_kernel(&b)).unwrap();
        let rhs = perm_kernel(&a.then(&b));
        assert!(lhs.max_abs_diff(&rhs) < 1e-15);
    }

    #[test]
    fn closure_of_shift_is_cyclic() {
        let g = FiniteGroup::close_generators(&[shift(6)], DEFAULT_GROUP_CAP).unwrap();
        assert_eq!(g.order(), 6);
        assert_eq!(g.orbits(), vec![vec![0, 1, 2, 3, 4, 5]]);
    }

    #[test]
    fn closure_of_involution_has_order_two() {
        // x ↦ -x on signed interval [-2, 2] under index x+2
        let flip = Perm::new(vec![4, 3, 2, 1, 0]).unwrap();
        let g = FiniteGroup::close_generators(&[flip], DEFAULT_GROUP_CAP).unwrap();
        assert_eq!(g.order(), 2);
        assert_eq!(g.orbits(), vec![vec![0, 4], vec![1, 3], vec![2]]);
    }

    #[test]
    fn closure_respects_cap() {
        match FiniteGroup::close_generators(&[shift(12)], 5) {
            Err(Error::GroupCapExceeded { cap: 5 }) => {}
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn trivial_group_orbits_are_singletons() {
        let g = FiniteGroup::trivial(4);
        assert_eq!(g.orbits().len(), 4);
    }

    #[test]
    fn from_elements_rejects_non_groups() {
        let s = shift(4);
        assert!(FiniteGroup::from_elements(vec![Perm::identity(4), s.clone()]).is_err());
        assert!(FiniteGroup::from_elements(vec![s]).is_err());
    }

    #[test]
    fn pair_measure_kinds() {
        let flip = Perm::new(vec![1, 0]).unwrap();
        let g2 = FiniteGroup::close_generators(&[flip], 10).unwrap();
        assert_eq!(pair_measure(&g2, PairMeasureKind::Product).atoms().len(), 4);
        // conjugation on an involution group pairs each element with itself
        let conj = pair_measure(&g2, PairMeasureKind::Conjugation);
        assert_eq!(conj.weight(0, 0), 0.5);
        assert_eq!(conj.weight(1, 1), 0.5);

        let g1 = FiniteGroup::trivial(3);
        for kind in [
            PairMeasureKind::Product,
            PairMeasureKind::Conjugation,
            PairMeasureKind::Twisted,
            PairMeasureKind::Left,
            PairMeasureKind::Right,
        ] {
            let nu = pair_measure(&g1, kind);
            assert_eq!(nu.atoms(), &[(0, 0, 1.0)]);
        }
    }

    #[test]
    fn measure_symmetry() {
        let c3 = FiniteGroup::close_generators(&[shift(3)], 10).unwrap();
        assert!(is_measure_symmetric(&c3, &pair_measure(&c3, PairMeasureKind::Conjugation)));
        assert!(is_measure_symmetric(&c3, &pair_measure(&c3, PairMeasureKind::Product)));
        // left measure on a group with an element of order 3 is not symmetric:
        // (g, e) would need to match (e, g⁻¹)
        assert!(!is_measure_symmetric(&c3, &pair_measure(&c3, PairMeasureKind::Left)));
    }

    #[test]
    fn pi_invariance() {
        let flip = Perm::new(vec![4, 3, 2, 1, 0]).unwrap();
        let g = FiniteGroup::close_generators(&[flip], 10).unwrap();
        assert!(g.is_pi_invariant(&Distribution::uniform(5)));
        let sym = Distribution::new(vec![0.1, 0.2, 0.4, 0.2, 0.1]).unwrap();
        assert!(g.is_pi_invariant(&sym));
        let asym = Distribution::new(vec![0.3, 0.2, 0.2, 0.2, 0.1]).unwrap();
        assert!(!g.is_pi_invariant(&asym));
    }
}
