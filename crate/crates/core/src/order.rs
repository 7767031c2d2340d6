//! Finite quasi-ordered sets with a decreasing weight, and the descent that
//! finds a maximal element above any starting point.
//!
//! An element `v` is *(≤,φ)-maximal* when `v ≤ w` forces `φ(v) = φ(w)`.
//! With `β(v) = min { φ(w) : v ≤ w }` this is the same as `φ(v) = β(v)`.
//! The descent moves from `v` to some `w ≥ v` with
//! `φ(w) < (φ(v) + β(v)) / 2` until the current element is maximal.
//!
//! Sequential inductivity (every ascending sequence is bounded above) holds
//! automatically for finite structures and is therefore not represented.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::dist::Dist;

/// Laws checked by the validators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderLaw {
    Reflexivity,
    Irreflexivity,
    Transitivity,
    /// `x ≤ y ⟹ φ(x) ≥ φ(y)`.
    Decreasing,
    /// `x < y ⟹ φ(x) > φ(y)`.
    StrictlyDecreasing,
}

impl fmt::Display for OrderLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OrderLaw::Reflexivity => "reflexivity",
            OrderLaw::Irreflexivity => "irreflexivity",
            OrderLaw::Transitivity => "transitivity",
            OrderLaw::Decreasing => "weight decreasing along the order",
            OrderLaw::StrictlyDecreasing => "weight strictly decreasing along the strict order",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderReport {
    pub law: OrderLaw,
    pub witness: Vec<usize>,
}

impl fmt::Display for OrderReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w: Vec<String> = self.witness.iter().map(usize::to_string).collect();
        write!(f, "{} violated at ({})", self.law, w.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderError {
    #[error("an order needs at least one element")]
    Empty,
    #[error("relation has shape {rows}x{cols}, expected {n}x{n}")]
    RelationShape { n: usize, rows: usize, cols: usize },
    #[error("weight vector has {len} entries, expected {n}")]
    WeightShape { n: usize, len: usize },
    #[error("element {index} out of range for {n} elements")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("{0}")]
    Invalid(OrderReport),
    #[error("weight is not admissible: {0}")]
    Inadmissible(OrderReport),
    #[error("internal consistency failure: {0}")]
    Inconsistent(String),
}

fn flatten(n: usize, rel: Vec<Vec<bool>>) -> Result<Vec<bool>, OrderError> {
    if n == 0 {
        return Err(OrderError::Empty);
    }
    if rel.len() != n {
        return Err(OrderError::RelationShape { n, rows: rel.len(), cols: rel.first().map_or(0, Vec::len) });
    }
    if let Some(row) = rel.iter().find(|r| r.len() != n) {
        return Err(OrderError::RelationShape { n, rows: n, cols: row.len() });
    }
    Ok(rel.into_iter().flatten().collect())
}

fn first_intransitive(n: usize, rel: &[bool]) -> Option<[usize; 3]> {
    let r = |a: usize, b: usize| rel[a * n + b];
    for x in 0..n {
        for y in 0..n {
            if !r(x, y) {
                continue;
            }
            for z in 0..n {
                if r(y, z) && !r(x, z) {
                    return Some([x, y, z]);
                }
            }
        }
    }
    None
}

/// A reflexive, transitive relation with a weight that decreases along it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuasiOrderedSet {
    n: usize,
    leq: Vec<bool>,
    phi: Vec<Dist>,
}

/// Validates `(leq, phi)`; reports the first violated law with a witness.
pub fn validate_quasiorder(
    n: usize,
    leq: Vec<Vec<bool>>,
    phi: Vec<Dist>,
) -> Result<QuasiOrderedSet, OrderError> {
    let leq = flatten(n, leq)?;
    QuasiOrderedSet::from_flat(n, leq, phi)
}

impl QuasiOrderedSet {
    /// Same as [`validate_quasiorder`] on a row-major relation.
    pub fn from_flat(n: usize, leq: Vec<bool>, phi: Vec<Dist>) -> Result<Self, OrderError> {
        if n == 0 {
            return Err(OrderError::Empty);
        }
        if leq.len() != n * n {
            return Err(OrderError::RelationShape { n, rows: leq.len() / n.max(1), cols: n });
        }
        if phi.len() != n {
            return Err(OrderError::WeightShape { n, len: phi.len() });
        }
        if let Some(x) = (0..n).find(|&x| !leq[x * n + x]) {
            return Err(OrderError::Invalid(OrderReport { law: OrderLaw::Reflexivity, witness: vec![x] }));
        }
        if let Some(w) = first_intransitive(n, &leq) {
            return Err(OrderError::Invalid(OrderReport { law: OrderLaw::Transitivity, witness: w.to_vec() }));
        }
        for x in 0..n {
            for y in 0..n {
                if leq[x * n + y] && phi[x] < phi[y] {
                    return Err(OrderError::Invalid(OrderReport {
                        law: OrderLaw::Decreasing,
                        witness: vec![x, y],
                    }));
                }
            }
        }
        Ok(QuasiOrderedSet { n, leq, phi })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn leq(&self, x: usize, y: usize) -> bool {
        self.leq[x * self.n + y]
    }

    pub fn phi(&self) -> &[Dist] {
        &self.phi
    }

    pub fn relation(&self) -> Vec<Vec<bool>> {
        self.leq.chunks(self.n).map(<[bool]>::to_vec).collect()
    }

    /// The up-section `{ w : v ≤ w }`.
    pub fn section(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&w| self.leq(v, w))
    }

    fn check_index(&self, index: usize) -> Result<(), OrderError> {
        if index < self.n {
            Ok(())
        } else {
            Err(OrderError::IndexOutOfRange { index, n: self.n })
        }
    }

    pub fn distinct_weights(&self) -> usize {
        self.phi.iter().collect::<BTreeSet<_>>().len()
    }
}

/// `min φ` over the up-section of `v`; never above `φ(v)`.
pub fn beta(q: &QuasiOrderedSet, v: usize) -> Dist {
    q.section(v)
        .map(|w| &q.phi[w])
        .min()
        .expect("section contains v")
        .clone()
}

/// `φ(v) = β(v)`.
pub fn is_bb_maximal(q: &QuasiOrderedSet, v: usize) -> bool {
    q.phi[v] == beta(q, v)
}

/// How the descent picks its next element among the admissible ones.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessorRule {
    /// Smallest weight, then lowest index. Lands on a maximal element in
    /// at most one step.
    #[default]
    MinimalWeight,
    /// Lowest admissible index. Longer chains, same guarantees.
    FirstAdmissible,
}

/// Result of the maximal-element descent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MaximalReport {
    pub element: usize,
    /// Visited elements, starting at the query element.
    pub chain: Vec<usize>,
    pub steps: usize,
}

/// A maximal element above `u` using [`SuccessorRule::MinimalWeight`].
pub fn bb_maximal(q: &QuasiOrderedSet, u: usize) -> Result<MaximalReport, OrderError> {
    bb_maximal_with(q, u, SuccessorRule::MinimalWeight)
}

pub fn bb_maximal_with(
    q: &QuasiOrderedSet,
    u: usize,
    rule: SuccessorRule,
) -> Result<MaximalReport, OrderError> {
    q.check_index(u)?;
    let mut chain = vec![u];
    let mut current = u;
    loop {
        let floor = beta(q, current);
        if q.phi[current] == floor {
            break;
        }
        let threshold = q.phi[current].midpoint(&floor);
        let mut admissible = q.section(current).filter(|&w| q.phi[w] < threshold);
        let next = match rule {
            SuccessorRule::MinimalWeight => admissible.min_by(|&a, &b| q.phi[a].cmp(&q.phi[b])),
            SuccessorRule::FirstAdmissible => admissible.next(),
        }
        .ok_or_else(|| OrderError::Inconsistent(format!("no admissible successor of {current}")))?;
        chain.push(next);
        current = next;
        // phi strictly decreases, so this bounds the loop
        if chain.len() > q.n {
            return Err(OrderError::Inconsistent("descent did not terminate".into()));
        }
    }
    Ok(MaximalReport { element: current, steps: chain.len() - 1, chain })
}

impl MaximalReport {
    /// Re-checks the report against `q` from scratch.
    pub fn verify(&self, q: &QuasiOrderedSet) -> Result<(), String> {
        let (Some(&first), Some(&last)) = (self.chain.first(), self.chain.last()) else {
            return Err("empty chain".into());
        };
        if last != self.element {
            return Err("chain does not end at the reported element".into());
        }
        if self.steps + 1 != self.chain.len() {
            return Err("step count does not match the chain".into());
        }
        if self.chain.iter().any(|&x| x >= q.len()) {
            return Err("chain leaves the carrier".into());
        }
        if !q.leq(first, self.element) {
            return Err(format!("{} is not above the start {first}", self.element));
        }
        for pair in self.chain.windows(2) {
            let (cur, next) = (pair[0], pair[1]);
            if !q.leq(cur, next) {
                return Err(format!("step {cur} -> {next} leaves the order"));
            }
            let threshold = q.phi[cur].midpoint(&beta(q, cur));
            if q.phi[next] >= threshold {
                return Err(format!("step {cur} -> {next} misses the midpoint threshold"));
            }
        }
        if !is_bb_maximal(q, self.element) {
            return Err(format!("{} is not maximal", self.element));
        }
        if self.steps > q.distinct_weights() {
            return Err("more steps than distinct weights".into());
        }
        Ok(())
    }
}

/// Maximal elements straight from the definition: every `w ≥ v` has the
/// weight of `v`. Serves as an oracle for the descent.
pub fn brute_maximal_set(q: &QuasiOrderedSet) -> BTreeSet<usize> {
    (0..q.n)
        .filter(|&v| (0..q.n).all(|w| !q.leq(v, w) || q.phi[v] == q.phi[w]))
        .collect()
}

/// An irreflexive transitive relation with a strictly decreasing weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrictOrderedSet {
    n: usize,
    lt: Vec<bool>,
    phi: Vec<Dist>,
}

/// Validates a strict order. Without a weight, the number of strict
/// successors is used, which always decreases strictly.
pub fn validate_strict_order(
    n: usize,
    lt: Vec<Vec<bool>>,
    phi: Option<Vec<Dist>>,
) -> Result<StrictOrderedSet, OrderError> {
    let lt = flatten(n, lt)?;
    if let Some(x) = (0..n).find(|&x| lt[x * n + x]) {
        return Err(OrderError::Invalid(OrderReport { law: OrderLaw::Irreflexivity, witness: vec![x] }));
    }
    if let Some(w) = first_intransitive(n, &lt) {
        return Err(OrderError::Invalid(OrderReport { law: OrderLaw::Transitivity, witness: w.to_vec() }));
    }
    let phi = match phi {
        Some(phi) => {
            if phi.len() != n {
                return Err(OrderError::WeightShape { n, len: phi.len() });
            }
            for x in 0..n {
                for y in 0..n {
                    if lt[x * n + y] && phi[x] <= phi[y] {
                        return Err(OrderError::Inadmissible(OrderReport {
                            law: OrderLaw::StrictlyDecreasing,
                            witness: vec![x, y],
                        }));
                    }
                }
            }
            phi
        }
        None => (0..n)
            .map(|x| Dist::from((0..n).filter(|&y| lt[x * n + y]).count() as u64))
            .collect(),
    };
    Ok(StrictOrderedSet { n, lt, phi })
}

impl StrictOrderedSet {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn lt(&self, x: usize, y: usize) -> bool {
        self.lt[x * self.n + y]
    }

    pub fn phi(&self) -> &[Dist] {
        &self.phi
    }

    /// `x ≤ y` iff `x < y` or `x = y`, with the same weight.
    pub fn reflexive_closure(&self) -> Result<QuasiOrderedSet, OrderError> {
        let n = self.n;
        let leq = (0..n * n).map(|i| self.lt[i] || i / n == i % n).collect();
        QuasiOrderedSet::from_flat(n, leq, self.phi.clone())
    }

    /// Whether nothing lies strictly above `v`.
    pub fn strict_section_empty(&self, v: usize) -> bool {
        (0..self.n).all(|w| !self.lt(v, w))
    }
}

/// An element above `u` with nothing strictly above it, found by running
/// the weighted descent on the reflexive closure.
pub fn zorn_maximal(s: &StrictOrderedSet, u: usize) -> Result<usize, OrderError> {
    if u >= s.n {
        return Err(OrderError::IndexOutOfRange { index: u, n: s.n });
    }
    let closure = s.reflexive_closure()?;
    let v = bb_maximal(&closure, u)?.element;
    if !s.strict_section_empty(v) {
        return Err(OrderError::Inconsistent(format!("{v} has a strict successor")));
    }
    Ok(v)
}

/// Whether every pair has a greatest lower bound. Only meaningful for
/// antisymmetric relations; exposed as a test utility.
pub fn has_inf_lattice(q: &QuasiOrderedSet) -> bool {
    let n = q.len();
    (0..n).all(|x| {
        (0..n).all(|y| {
            let lower: Vec<usize> = (0..n).filter(|&z| q.leq(z, x) && q.leq(z, y)).collect();
            lower.iter().any(|&g| lower.iter().all(|&z| q.leq(z, g)))
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: &[u64]) -> Vec<Dist> {
        v.iter().map(|&x| Dist::from(x)).collect()
    }

    fn rel(n: usize, pairs: &[(usize, usize)], reflexive: bool) -> Vec<Vec<bool>> {
        let mut r = vec![vec![false; n]; n];
        for (i, row) in r.iter_mut().enumerate() {
            row[i] = reflexive;
        }
        for &(a, b) in pairs {
            r[a][b] = true;
        }
        r
    }

    fn chain3(phi: &[u64]) -> QuasiOrderedSet {
        validate_quasiorder(3, rel(3, &[(0, 1), (1, 2), (0, 2)], true), w(phi)).unwrap()
    }

    fn diamond() -> QuasiOrderedSet {
        validate_quasiorder(3, rel(3, &[(0, 1), (0, 2)], true), w(&[3, 1, 1])).unwrap()
    }

    #[test]
    fn validation_examples() {
        assert!(validate_quasiorder(3, rel(3, &[], true), w(&[4, 0, 9])).is_ok());
        let err = validate_quasiorder(3, rel(3, &[(0, 1), (1, 2)], true), w(&[0, 0, 0])).unwrap_err();
        assert_eq!(
            err,
            OrderError::Invalid(OrderReport { law: OrderLaw::Transitivity, witness: vec![0, 1, 2] })
        );
        let err = validate_quasiorder(2, rel(2, &[(0, 1)], true), w(&[1, 2])).unwrap_err();
        assert_eq!(err, OrderError::Invalid(OrderReport { law: OrderLaw::Decreasing, witness: vec![0, 1] }));
        let err = validate_quasiorder(2, rel(2, &[], false), w(&[1, 2])).unwrap_err();
        assert_eq!(err, OrderError::Invalid(OrderReport { law: OrderLaw::Reflexivity, witness: vec![0] }));
        assert_eq!(validate_quasiorder(0, vec![], vec![]).unwrap_err(), OrderError::Empty);
        assert!(matches!(
            validate_quasiorder(2, rel(2, &[], true), w(&[1])),
            Err(OrderError::WeightShape { .. })
        ));
        assert!(matches!(
            validate_quasiorder(2, vec![vec![true]], w(&[1, 1])),
            Err(OrderError::RelationShape { .. })
        ));
    }

    #[test]
    fn beta_examples() {
        let discrete = validate_quasiorder(3, rel(3, &[], true), w(&[4, 0, 9])).unwrap();
        for v in 0..3 {
            assert_eq!(beta(&discrete, v), discrete.phi()[v]);
            assert!(is_bb_maximal(&discrete, v));
        }
        assert_eq!(beta(&chain3(&[2, 1, 0]), 0), Dist::zero());
        assert_eq!(beta(&diamond(), 0), Dist::one());
    }

    #[test]
    fn maximality_examples() {
        let c = chain3(&[2, 1, 0]);
        assert!(!is_bb_maximal(&c, 0));
        assert!(is_bb_maximal(&c, 2));
        let flat = chain3(&[1, 1, 1]);
        assert!((0..3).all(|v| is_bb_maximal(&flat, v)));
    }

    #[test]
    fn descent_examples() {
        let c = chain3(&[2, 1, 0]);
        let r = bb_maximal(&c, 0).unwrap();
        assert_eq!(r.element, 2);
        r.verify(&c).unwrap();

        let anti = validate_quasiorder(2, rel(2, &[], true), w(&[5, 7])).unwrap();
        let r = bb_maximal(&anti, 0).unwrap();
        assert_eq!((r.element, r.steps, r.chain.clone()), (0, 0, vec![0]));

        let d = diamond();
        assert_eq!(bb_maximal(&d, 0).unwrap().element, 1);
        assert_eq!(brute_maximal_set(&d), BTreeSet::from([1, 2]));
        assert!(matches!(bb_maximal(&d, 3), Err(OrderError::IndexOutOfRange { .. })));
    }

    #[test]
    fn first_admissible_takes_longer_chains() {
        // 0 ≤ 1 ≤ 2 ≤ 3 with weights 8, 3, 1, 0: beta(0) = 0, threshold 4.
        let pairs: Vec<(usize, usize)> = (0..4).flat_map(|a| (a + 1..4).map(move |b| (a, b))).collect();
        let q = validate_quasiorder(4, rel(4, &pairs, true), w(&[8, 3, 1, 0])).unwrap();
        let r = bb_maximal_with(&q, 0, SuccessorRule::FirstAdmissible).unwrap();
        assert_eq!(r.chain, vec![0, 1, 2, 3]);
        r.verify(&q).unwrap();
        let r = bb_maximal(&q, 0).unwrap();
        assert_eq!(r.chain, vec![0, 3]);
    }

    #[test]
    fn brute_set_examples() {
        let discrete = validate_quasiorder(3, rel(3, &[], true), w(&[1, 1, 1])).unwrap();
        assert_eq!(brute_maximal_set(&discrete), BTreeSet::from([0, 1, 2]));
        assert_eq!(brute_maximal_set(&chain3(&[2, 1, 0])), BTreeSet::from([2]));
    }

    #[test]
    fn one_element() {
        let q = validate_quasiorder(1, vec![vec![true]], w(&[3])).unwrap();
        let r = bb_maximal(&q, 0).unwrap();
        assert_eq!(r.chain, vec![0]);
    }

    #[test]
    fn zorn_examples() {
        let empty = validate_strict_order(3, rel(3, &[], false), None).unwrap();
        assert_eq!(zorn_maximal(&empty, 1).unwrap(), 1);

        let chain = validate_strict_order(3, rel(3, &[(0, 1), (1, 2), (0, 2)], false), Some(w(&[2, 1, 0]))).unwrap();
        assert_eq!(zorn_maximal(&chain, 0).unwrap(), 2);

        let diamond = validate_strict_order(3, rel(3, &[(0, 1), (0, 2)], false), Some(w(&[3, 1, 0]))).unwrap();
        let v = zorn_maximal(&diamond, 0).unwrap();
        assert!(v == 1 || v == 2);
        assert!(diamond.strict_section_empty(v));
        let canonical = validate_strict_order(3, rel(3, &[(0, 1), (0, 2)], false), None).unwrap();
        assert_eq!(canonical.phi(), w(&[2, 0, 0]).as_slice());
        assert!(canonical.strict_section_empty(zorn_maximal(&canonical, 0).unwrap()));
    }

    #[test]
    fn strict_order_errors() {
        let err = validate_strict_order(2, rel(2, &[(0, 1)], false), Some(w(&[1, 1]))).unwrap_err();
        assert!(matches!(err, OrderError::Inadmissible(OrderReport { law: OrderLaw::StrictlyDecreasing, .. })));
        let err = validate_strict_order(2, rel(2, &[], true), None).unwrap_err();
        assert!(matches!(err, OrderError::Invalid(OrderReport { law: OrderLaw::Irreflexivity, .. })));
    }

    #[test]
    fn inf_lattice() {
        assert!(has_inf_lattice(&chain3(&[2, 1, 0])));
        // 1 and 2 have lower bound 0 in the diamond
        assert!(has_inf_lattice(&diamond()));
        let v = validate_quasiorder(3, rel(3, &[(1, 0), (2, 0)], true), w(&[0, 1, 1])).unwrap();
        assert!(!has_inf_lattice(&v));
    }
}
