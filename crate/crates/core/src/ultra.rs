//! Finite ultrametric spaces and the algebra of closed balls.
//!
//! A [`FiniteUltraSpace`] can only be obtained through [`check_ultrametric`],
//! so every instance satisfies identity, symmetry and the strong triangle
//! inequality `d(x,z) <= max(d(x,y), d(y,z))`. Balls are identified by their
//! member sets: in an ultrametric space two (center, radius) pairs often name
//! the same ball, and any member of a ball is also a center of it.

use std::fmt;

use fixedbitset::FixedBitSet;
use serde::Serialize;
use thiserror::Error;

use crate::dist::Dist;

/// Member set of a ball or of a chain intersection, indexed by point.
pub type PointSet = FixedBitSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpaceError {
    #[error("empty space")]
    Empty,
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("distance matrix has {rows} rows but {labels} labels")]
    RowCount { rows: usize, labels: usize },
    #[error("row {row} has {len} entries, expected {expected}")]
    RowLength { row: usize, len: usize, expected: usize },
    #[error("unknown point `{0}`")]
    UnknownPoint(String),
    #[error("point index {index} out of range for a space of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{0}")]
    Invalid(ValidationReport),
}

/// The axioms a distance matrix is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axiom {
    /// `d(x,y) = 0` iff `x = y`.
    Identity,
    /// `d(x,y) = d(y,x)`.
    Symmetry,
    /// `d(x,z) <= max(d(x,y), d(y,z))`.
    UltraTriangle,
    /// `d(x,z) <= d(x,y) + d(y,z)`; only checked for plain metric input.
    Triangle,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Axiom::Identity => "identity (zero diagonal, positive off-diagonal)",
            Axiom::Symmetry => "symmetry",
            Axiom::UltraTriangle => "ultra-triangle inequality",
            Axiom::Triangle => "triangle inequality",
        };
        f.write_str(name)
    }
}

/// One violated axiom together with its lexicographically smallest witness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub axiom: Axiom,
    /// Point indices: a pair for identity and symmetry, a triple otherwise.
    pub witness: Vec<usize>,
    pub labels: Vec<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn violates(&self, axiom: Axiom) -> Option<&Violation> {
        self.violations.iter().find(|v| v.axiom == axiom)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{} violated at ({}): {}", v.axiom, v.labels.join(", "), v.detail))
            .collect();
        f.write_str(&parts.join("; "))
    }
}

/// A labelled square matrix of distances with no axioms enforced yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistMatrix {
    labels: Vec<String>,
    entries: Vec<Dist>,
}

impl DistMatrix {
    /// Checks shape, emptiness and label uniqueness only.
    pub fn new(labels: Vec<String>, rows: Vec<Vec<Dist>>) -> Result<Self, SpaceError> {
        let n = labels.len();
        if n == 0 {
            return Err(SpaceError::Empty);
        }
        let mut seen = std::collections::HashSet::with_capacity(n);
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(SpaceError::DuplicateLabel(label.clone()));
            }
        }
        if rows.len() != n {
            return Err(SpaceError::RowCount { rows: rows.len(), labels: n });
        }
        let mut entries = Vec::with_capacity(n * n);
        for (row, values) in rows.into_iter().enumerate() {
            if values.len() != n {
                return Err(SpaceError::RowLength { row, len: values.len(), expected: n });
            }
            entries.extend(values);
        }
        Ok(DistMatrix { labels, entries })
    }

    /// Builds the matrix of `dist` over `0..n`, with labels `label(i)`.
    pub fn from_fn(
        n: usize,
        label: impl Fn(usize) -> String,
        dist: impl Fn(usize, usize) -> Dist,
    ) -> Result<Self, SpaceError> {
        let labels = (0..n).map(label).collect();
        let rows = (0..n).map(|i| (0..n).map(|j| dist(i, j)).collect()).collect();
        Self::new(labels, rows)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize, SpaceError> {
        self.labels
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| SpaceError::UnknownPoint(name.to_string()))
    }

    pub fn check_index(&self, index: usize) -> Result<usize, SpaceError> {
        if index < self.len() {
            Ok(index)
        } else {
            Err(SpaceError::IndexOutOfRange { index, len: self.len() })
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &Dist {
        &self.entries[i * self.len() + j]
    }

    pub fn rows(&self) -> Vec<Vec<Dist>> {
        self.entries.chunks(self.len()).map(|r| r.to_vec()).collect()
    }

    /// Classifies the triangle `(x, y, z)` by the isosceles property.
    pub fn isosceles_at(&self, x: usize, y: usize, z: usize) -> Isosceles {
        let (dxy, dyz, dxz) = (self.get(x, y), self.get(y, z), self.get(x, z));
        if dxy == dyz {
            Isosceles::Vacuous
        } else if dxz == dxy.max_of(dyz) {
            Isosceles::Holds
        } else {
            Isosceles::CounterWitness
        }
    }

    /// Name-based form of [`DistMatrix::isosceles_at`].
    pub fn isosceles_check(&self, x: &str, y: &str, z: &str) -> Result<Isosceles, SpaceError> {
        Ok(self.isosceles_at(self.index_of(x)?, self.index_of(y)?, self.index_of(z)?))
    }

    fn violation(&self, axiom: Axiom, witness: Vec<usize>, detail: String) -> Violation {
        let labels = witness.iter().map(|&i| self.labels[i].clone()).collect();
        Violation { axiom, witness, labels, detail }
    }

    fn identity_and_symmetry(&self, out: &mut Vec<Violation>) {
        let n = self.len();
        let identity = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .find(|&(i, j)| (i == j) != self.get(i, j).is_zero());
        if let Some((i, j)) = identity {
            let detail = if i == j {
                format!("d({0},{0}) = {1} but must be 0", self.labels[i], self.get(i, i))
            } else {
                format!("d({},{}) = 0 for distinct points", self.labels[i], self.labels[j])
            };
            out.push(self.violation(Axiom::Identity, vec![i, j], detail));
        }
        let symmetry = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .find(|&(i, j)| self.get(i, j) != self.get(j, i));
        if let Some((i, j)) = symmetry {
            let detail = format!(
                "d({a},{b}) = {} but d({b},{a}) = {}",
                self.get(i, j),
                self.get(j, i),
                a = self.labels[i],
                b = self.labels[j]
            );
            out.push(self.violation(Axiom::Symmetry, vec![i, j], detail));
        }
    }
}

/// Outcome of the isosceles classification of a triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Isosceles {
    /// `d(x,y) = d(y,z)`: the statement has nothing to say.
    Vacuous,
    /// `d(x,z) = max(d(x,y), d(y,z))`.
    Holds,
    /// Only reachable on matrices that are not ultrametric.
    CounterWitness,
}

/// A validated finite ultrametric space.
///
/// Besides the matrix, the space keeps the sorted set of distinct distance
/// values and, for every entry, its rank in that set. Ranks preserve the
/// exact order of the values, so the cubic scans compare integers.
#[derive(Debug, Clone)]
pub struct FiniteUltraSpace {
    matrix: DistMatrix,
    values: Vec<Dist>,
    rank: Vec<u32>,
}

impl PartialEq for FiniteUltraSpace {
    fn eq(&self, other: &Self) -> bool {
        self.matrix == other.matrix
    }
}

impl Eq for FiniteUltraSpace {}

fn rank_entries(matrix: &DistMatrix) -> (Vec<Dist>, Vec<u32>) {
    let mut values = matrix.entries.clone();
    values.sort();
    values.dedup();
    let rank = matrix
        .entries
        .iter()
        .map(|d| values.binary_search(d).expect("value present") as u32)
        .collect();
    (values, rank)
}

/// Validates a labelled matrix as an ultrametric space.
///
/// On failure the report lists every violated axiom, each with the
/// lexicographically smallest witness.
pub fn check_ultrametric(
    labels: Vec<String>,
    rows: Vec<Vec<Dist>>,
) -> Result<FiniteUltraSpace, SpaceError> {
    FiniteUltraSpace::from_matrix(DistMatrix::new(labels, rows)?)
}

impl FiniteUltraSpace {
    pub fn from_matrix(matrix: DistMatrix) -> Result<Self, SpaceError> {
        let mut violations = Vec::new();
        matrix.identity_and_symmetry(&mut violations);
        let (values, rank) = rank_entries(&matrix);
        let n = matrix.len();
        let r = |i: usize, j: usize| rank[i * n + j];
        'scan: for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if r(i, k) > r(i, j).max(r(j, k)) {
                        let detail = format!(
                            "d({x},{z}) = {} > max(d({x},{y}) = {}, d({y},{z}) = {})",
                            matrix.get(i, k),
                            matrix.get(i, j),
                            matrix.get(j, k),
                            x = matrix.labels[i],
                            y = matrix.labels[j],
                            z = matrix.labels[k],
                        );
                        violations.push(matrix.violation(Axiom::UltraTriangle, vec![i, j, k], detail));
                        break 'scan;
                    }
                }
            }
        }
        if !violations.is_empty() {
            return Err(SpaceError::Invalid(ValidationReport { violations }));
        }
        Ok(FiniteUltraSpace { matrix, values, rank })
    }

    pub fn matrix(&self) -> &DistMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> DistMatrix {
        self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        self.matrix.labels()
    }

    pub fn label(&self, i: usize) -> &str {
        self.matrix.label(i)
    }

    pub fn index_of(&self, name: &str) -> Result<usize, SpaceError> {
        self.matrix.index_of(name)
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> &Dist {
        self.matrix.get(i, j)
    }

    /// Position of `d(i,j)` in [`FiniteUltraSpace::distance_values`].
    #[inline]
    pub fn dist_rank(&self, i: usize, j: usize) -> u32 {
        self.rank[i * self.len() + j]
    }

    /// Sorted distinct distances; the first entry is always 0.
    pub fn distance_values(&self) -> &[Dist] {
        &self.values
    }

    /// Radii worth enumerating: any other radius gives a ball equal to one
    /// obtained from the largest candidate below it.
    pub fn radius_candidates(&self) -> &[Dist] {
        &self.values
    }

    /// Isosceles classification by index, on the exact value ranks.
    pub fn isosceles_at(&self, x: usize, y: usize, z: usize) -> Isosceles {
        let (dxy, dyz, dxz) = (self.dist_rank(x, y), self.dist_rank(y, z), self.dist_rank(x, z));
        if dxy == dyz {
            Isosceles::Vacuous
        } else if dxz == dxy.max(dyz) {
            Isosceles::Holds
        } else {
            Isosceles::CounterWitness
        }
    }

    pub fn isosceles_check(&self, x: &str, y: &str, z: &str) -> Result<Isosceles, SpaceError> {
        Ok(self.isosceles_at(self.index_of(x)?, self.index_of(y)?, self.index_of(z)?))
    }

    /// The closed ball `X[center, radius] = { x : d(center, x) <= radius }`.
    pub fn ball(&self, center: usize, radius: Dist) -> ClosedBall<'_> {
        let n = self.len();
        assert!(center < n, "center {center} out of range for {n} points");
        let mut members = FixedBitSet::with_capacity(n);
        for x in 0..n {
            if self.dist(center, x) <= &radius {
                members.insert(x);
            }
        }
        ClosedBall { space: self, center, radius, members }
    }

    pub fn ball_named(&self, center: &str, radius: Dist) -> Result<ClosedBall<'_>, SpaceError> {
        Ok(self.ball(self.index_of(center)?, radius))
    }

    /// Every ball `X[a, r]` with `a` a point and `r` a radius candidate.
    pub fn all_balls(&self) -> Vec<ClosedBall<'_>> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * self.values.len());
        for center in 0..n {
            // members grow with the radius, so fill them incrementally
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by_key(|&x| self.dist_rank(center, x));
            let mut members = FixedBitSet::with_capacity(n);
            let mut next = 0;
            for (rank, radius) in self.values.iter().enumerate() {
                while next < n && self.dist_rank(center, order[next]) as usize <= rank {
                    members.insert(order[next]);
                    next += 1;
                }
                out.push(ClosedBall {
                    space: self,
                    center,
                    radius: radius.clone(),
                    members: members.clone(),
                });
            }
        }
        out
    }
}

/// How the member sets of two balls relate. Partial overlap has no tag: it
/// cannot happen in an ultrametric space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BallRelation {
    Disjoint,
    Equal,
    FirstInsideSecond,
    SecondInsideFirst,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BallError {
    #[error("balls belong to different spaces")]
    DifferentSpaces,
    #[error("balls X[{a},{r}] and X[{b},{s}] overlap without being nested")]
    PartialOverlap { a: String, r: Dist, b: String, s: Dist },
    #[error("balls X[{a},{r}] and X[{b},{s}] share a point and have radii {r} <= {s} but the first is not contained in the second")]
    NotNestedByRadius { a: String, r: Dist, b: String, s: Dist },
    #[error("first ball is not a proper subset of the second")]
    NotProperSubset,
    #[error("point `{0}` lies outside the ball")]
    OutsideBall(String),
    #[error("empty chain")]
    EmptyChain,
    #[error("chain is not descending at index {index}")]
    NotDescending { index: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// A closed ball together with its member set.
#[derive(Clone)]
pub struct ClosedBall<'s> {
    space: &'s FiniteUltraSpace,
    center: usize,
    radius: Dist,
    members: PointSet,
}

impl fmt::Debug for ClosedBall<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "X[{}, {}]", self.space.label(self.center), self.radius)
    }
}

impl<'s> ClosedBall<'s> {
    pub fn space(&self) -> &'s FiniteUltraSpace {
        self.space
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn radius(&self) -> &Dist {
        &self.radius
    }

    pub fn members(&self) -> &PointSet {
        &self.members
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.contains(x)
    }

    pub fn member_labels(&self) -> Vec<&'s str> {
        self.members.ones().map(|i| self.space.label(i)).collect()
    }

    fn same_space(&self, other: &ClosedBall<'_>) -> bool {
        std::ptr::eq(self.space, other.space) || self.space == other.space
    }
}

/// Member set of a ball; always contains the center.
pub fn ball_members<'a>(ball: &'a ClosedBall<'_>) -> &'a PointSet {
    &ball.members
}

/// Exact relation between the member sets of two balls.
///
/// Non-disjoint balls are re-checked against nesting by radius: the one with
/// the smaller radius must sit inside the other, and equal radii force equal
/// balls. A failure here means the space is not ultrametric.
pub fn ball_compare(b1: &ClosedBall<'_>, b2: &ClosedBall<'_>) -> Result<BallRelation, BallError> {
    if !b1.same_space(b2) {
        return Err(BallError::DifferentSpaces);
    }
    if b1.members.is_disjoint(&b2.members) {
        return Ok(BallRelation::Disjoint);
    }
    let first_in_second = b1.members.is_subset(&b2.members);
    let second_in_first = b2.members.is_subset(&b1.members);
    let labels = || {
        (
            b1.space.label(b1.center).to_string(),
            b1.radius.clone(),
            b2.space.label(b2.center).to_string(),
            b2.radius.clone(),
        )
    };
    if !first_in_second && !second_in_first {
        let (a, r, b, s) = labels();
        return Err(BallError::PartialOverlap { a, r, b, s });
    }
    let nested_ok = match b1.radius.cmp(&b2.radius) {
        std::cmp::Ordering::Less => first_in_second,
        std::cmp::Ordering::Greater => second_in_first,
        std::cmp::Ordering::Equal => first_in_second && second_in_first,
    };
    if !nested_ok {
        let (a, r, b, s) = labels();
        return Err(BallError::NotNestedByRadius { a, r, b, s });
    }
    Ok(match (first_in_second, second_in_first) {
        (true, true) => BallRelation::Equal,
        (true, false) => BallRelation::FirstInsideSecond,
        _ => BallRelation::SecondInsideFirst,
    })
}

/// For `members(b1) ⊊ members(b2)`, whether `r1 < r2`. Always true on a
/// valid space; the precondition is checked.
pub fn strict_inclusion_implies_smaller_radius(
    b1: &ClosedBall<'_>,
    b2: &ClosedBall<'_>,
) -> Result<bool, BallError> {
    if !b1.same_space(b2) {
        return Err(BallError::DifferentSpaces);
    }
    if !(b1.members.is_subset(&b2.members) && b1.members != b2.members) {
        return Err(BallError::NotProperSubset);
    }
    Ok(b1.radius < b2.radius)
}

/// Whether re-centering the ball at its member `y` keeps the member set.
pub fn recenter_invariance(ball: &ClosedBall<'_>, y: usize) -> Result<bool, BallError> {
    if y >= ball.space.len() || !ball.contains(y) {
        let name = if y < ball.space.len() {
            ball.space.label(y).to_string()
        } else {
            format!("#{y}")
        };
        return Err(BallError::OutsideBall(name));
    }
    let moved = ball.space.ball(y, ball.radius.clone());
    Ok(moved.members == ball.members)
}

/// Intersection of a descending chain of balls.
#[derive(Debug, Clone)]
pub struct ChainIntersection {
    pub members: PointSet,
    /// Lowest-index member of the intersection; finite spaces always have one.
    pub witness: Option<usize>,
    /// Number of distinct balls left after removing repeats.
    pub distinct_balls: usize,
}

/// Intersects `B_0 ⊇ B_1 ⊇ ...`. Repeated balls are collapsed first, so the
/// result is computed on the strictly descending subchain.
pub fn intersect_ball_chain(chain: &[ClosedBall<'_>]) -> Result<ChainIntersection, BallError> {
    let first = chain.first().ok_or(BallError::EmptyChain)?;
    let mut strict: Vec<&ClosedBall<'_>> = vec![first];
    for (index, pair) in chain.windows(2).enumerate() {
        let (prev, next) = (&pair[0], &pair[1]);
        if !prev.same_space(next) {
            return Err(BallError::DifferentSpaces);
        }
        if !next.members.is_subset(&prev.members) {
            return Err(BallError::NotDescending { index: index + 1 });
        }
        if next.members != prev.members {
            strict.push(next);
        }
    }
    let mut members = first.members.clone();
    for ball in &strict[1..] {
        members.intersect_with(&ball.members);
    }
    let witness = members.ones().next();
    Ok(ChainIntersection { members, witness, distinct_balls: strict.len() })
}
