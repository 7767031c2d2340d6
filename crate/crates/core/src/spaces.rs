//! Concrete ultrametric models: truncated p-adic integers, the Baire
//! sequence metric, discrete spaces, and spaces read off dendrograms.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dist::Dist;
use crate::ultra::{DistMatrix, FiniteUltraSpace, SpaceError};

/// Largest carrier [`padic_space`] materializes unless told otherwise.
pub const DEFAULT_CARRIER_BOUND: u64 = 2048;

/// Moduli above this are rejected so that residue products fit in `u128`
/// and signed intermediates fit in `i128`.
const MAX_MODULUS: u64 = 1 << 62;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("precision must be at least 1")]
    ZeroPrecision,
    #[error("p^N = {p}^{precision} exceeds the supported modulus 2^62")]
    ModulusTooLarge { p: u64, precision: u32 },
    #[error("carrier of {size} points exceeds the bound {bound}; use padic_dist on residues directly")]
    CarrierTooLarge { size: u64, bound: u64 },
    #[error("residue {value} is outside the carrier 0..{modulus}")]
    OutOfCarrier { value: u64, modulus: u64 },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// The residues `0..p^N` with distance `p^-min(v(a-b), N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PAdicModel {
    p: u64,
    precision: u32,
    modulus: u64,
}

impl PAdicModel {
    pub fn new(p: u64, precision: u32) -> Result<Self, ModelError> {
        if !is_prime(p) {
            return Err(ModelError::NotPrime(p));
        }
        if precision == 0 {
            return Err(ModelError::ZeroPrecision);
        }
        let modulus = p
            .checked_pow(precision)
            .filter(|&m| m <= MAX_MODULUS)
            .ok_or(ModelError::ModulusTooLarge { p, precision })?;
        Ok(PAdicModel { p, precision, modulus })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// `p^N`, the carrier size.
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// `p^k` for `k <= N`.
    pub fn power(&self, k: u32) -> u64 {
        self.p.pow(k.min(self.precision))
    }

    /// Canonical residue of any integer.
    pub fn reduce(&self, x: i128) -> u64 {
        x.rem_euclid(self.modulus as i128) as u64
    }

    pub fn check_residue(&self, value: u64) -> Result<u64, ModelError> {
        if value < self.modulus {
            Ok(value)
        } else {
            Err(ModelError::OutOfCarrier { value, modulus: self.modulus })
        }
    }

    /// Valuation of a residue, capped at the precision (so `v(0) = N`).
    pub fn valuation(&self, x: u64) -> u32 {
        let mut x = x % self.modulus;
        if x == 0 {
            return self.precision;
        }
        let mut v = 0;
        while x.is_multiple_of(self.p) {
            x /= self.p;
            v += 1;
        }
        v
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        ((a as u128 + b as u128) % self.modulus as u128) as u64
    }

    pub fn sub(&self, a: u64, b: u64) -> u64 {
        self.reduce(a as i128 - b as i128)
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.modulus as u128) as u64
    }

    /// Inverse of a unit; `None` when `p` divides `a`.
    pub fn inverse(&self, a: u64) -> Option<u64> {
        let (mut r0, mut r1) = (self.modulus as i128, (a % self.modulus) as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        (r0 == 1).then(|| self.reduce(t0))
    }

    /// Distance between two residues.
    pub fn dist(&self, a: u64, b: u64) -> Dist {
        if a % self.modulus == b % self.modulus {
            return Dist::zero();
        }
        Dist::inverse_power(self.p, self.valuation(self.sub(a, b)))
    }

    /// The level `k` with `X[a, r] = { x : x ≡ a mod p^k }`.
    pub fn ball_level(&self, radius: &Dist) -> u32 {
        (0..self.precision)
            .find(|&v| &Dist::inverse_power(self.p, v) <= radius)
            .unwrap_or(self.precision)
    }

    /// Residue class `(a mod p^k, k)` naming the member set of `X[a, r]`.
    pub fn ball_class(&self, center: u64, radius: &Dist) -> (u64, u32) {
        let k = self.ball_level(radius);
        (center % self.power(k), k)
    }

    /// Whether `X[a, r] ⊆ X[b, s]`, decided on residue classes.
    pub fn ball_within(&self, inner: (u64, &Dist), outer: (u64, &Dist)) -> bool {
        let (a, k) = self.ball_class(inner.0, inner.1);
        let (b, j) = self.ball_class(outer.0, outer.1);
        k >= j && a % self.power(j) == b
    }
}

/// `p^-min(v(a-b), N)` as an exact rational; 0 iff `a = b`.
pub fn padic_dist(model: &PAdicModel, a: u64, b: u64) -> Dist {
    model.dist(a, b)
}

/// Materializes the whole carrier as a finite space labelled `"0".."p^N-1"`.
pub fn padic_space(model: &PAdicModel, bound: u64) -> Result<FiniteUltraSpace, ModelError> {
    let size = model.modulus();
    if size > bound {
        return Err(ModelError::CarrierTooLarge { size, bound });
    }
    let matrix = DistMatrix::from_fn(size as usize, |i| i.to_string(), |i, j| model.dist(i as u64, j as u64))?;
    Ok(FiniteUltraSpace::from_matrix(matrix)?)
}

/// A finite sequence of symbols under the first-disagreement metric.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BaireSeq(pub Vec<u64>);

impl BaireSeq {
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        format!("({})", parts.join(","))
    }
}

/// `2^-k` with `k` the first index where the sequences differ; a sequence
/// that ends early differs from any longer one at its end.
pub fn baire_dist(s: &BaireSeq, t: &BaireSeq) -> Dist {
    let len = s.0.len().max(t.0.len());
    match (0..len).find(|&k| s.0.get(k) != t.0.get(k)) {
        None => Dist::zero(),
        Some(k) => Dist::inverse_power(2, k as u32),
    }
}

pub fn baire_space(seqs: &[BaireSeq]) -> Result<FiniteUltraSpace, SpaceError> {
    let matrix = DistMatrix::from_fn(seqs.len(), |i| seqs[i].label(), |i, j| baire_dist(&seqs[i], &seqs[j]))?;
    FiniteUltraSpace::from_matrix(matrix)
}

/// `n` points labelled `"1".."n"`, all at mutual distance 1.
pub fn discrete_space(n: usize) -> Result<FiniteUltraSpace, SpaceError> {
    let matrix = DistMatrix::from_fn(n, |i| (i + 1).to_string(), |i, j| Dist::from(u64::from(i != j)))?;
    FiniteUltraSpace::from_matrix(matrix)
}

/// One agglomeration step. Clusters `0..L` are the leaves; merge `k`
/// creates cluster `L + k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: Dist,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dendrogram {
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DendrogramError {
    #[error("dendrogram has no leaves")]
    NoLeaves,
    #[error("{leaves} leaves need {expected} merges, found {found}")]
    MergeCount { leaves: usize, expected: usize, found: usize },
    #[error("merge {merge} refers to cluster {id}, which does not exist yet")]
    UnknownCluster { merge: usize, id: usize },
    #[error("merge {merge} reuses cluster {id}")]
    ReusedCluster { merge: usize, id: usize },
    #[error("merge {merge} has non-positive height")]
    NonPositiveHeight { merge: usize },
    #[error("non-monotone heights: merge {merge} at {height} sits above a merge at {child_height}")]
    NonMonotone { merge: usize, height: Dist, child_height: Dist },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

impl Dendrogram {
    /// Checks that the merges form a full binary tree with heights that
    /// never decrease towards the root.
    pub fn validate(&self) -> Result<(), DendrogramError> {
        let leaves = self.leaves.len();
        if leaves == 0 {
            return Err(DendrogramError::NoLeaves);
        }
        if self.merges.len() != leaves - 1 {
            return Err(DendrogramError::MergeCount {
                leaves,
                expected: leaves - 1,
                found: self.merges.len(),
            });
        }
        let mut used = vec![false; 2 * leaves - 1];
        for (k, m) in self.merges.iter().enumerate() {
            if m.height.is_zero() {
                return Err(DendrogramError::NonPositiveHeight { merge: k });
            }
            for id in [m.a, m.b] {
                if id >= leaves + k {
                    return Err(DendrogramError::UnknownCluster { merge: k, id });
                }
                if used[id] || m.a == m.b {
                    return Err(DendrogramError::ReusedCluster { merge: k, id });
                }
                if id >= leaves {
                    let child = &self.merges[id - leaves].height;
                    if child > &m.height {
                        return Err(DendrogramError::NonMonotone {
                            merge: k,
                            height: m.height.clone(),
                            child_height: child.clone(),
                        });
                    }
                }
            }
            used[m.a] = true;
            used[m.b] = true;
        }
        Ok(())
    }

    /// Cophenetic distances: the height of the lowest merge joining two leaves.
    pub fn cophenetic(&self) -> Result<Vec<Vec<Dist>>, DendrogramError> {
        self.validate()?;
        let leaves = self.leaves.len();
        let mut members: Vec<Vec<usize>> = (0..leaves).map(|i| vec![i]).collect();
        let mut rows = vec![vec![Dist::zero(); leaves]; leaves];
        for m in &self.merges {
            let (left, right) = (std::mem::take(&mut members[m.a]), std::mem::take(&mut members[m.b]));
            for &x in &left {
                for &y in &right {
                    rows[x][y] = m.height.clone();
                    rows[y][x] = m.height.clone();
                }
            }
            members.push(left.into_iter().chain(right).collect());
        }
        Ok(rows)
    }
}

/// The cophenetic space of a dendrogram; re-validated as ultrametric.
pub fn dendrogram_to_space(dendrogram: &Dendrogram) -> Result<FiniteUltraSpace, DendrogramError> {
    let rows = dendrogram.cophenetic()?;
    let matrix = DistMatrix::new(dendrogram.leaves.clone(), rows)?;
    Ok(FiniteUltraSpace::from_matrix(matrix)?)
}

/// A seeded random merge tree over leaves `"v0".."v{n-1}"`.
///
/// Pairs of active clusters are merged uniformly at random; heights are drawn
/// from the grid `{1/k : 1 <= k <= n}` and sorted increasingly, so later
/// merges are never lower than earlier ones.
pub fn random_dendrogram(n: usize, seed: u64) -> Result<Dendrogram, DendrogramError> {
    if n == 0 {
        return Err(DendrogramError::NoLeaves);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut heights: Vec<Dist> = (1..n)
        .map(|_| Dist::ratio(1, rng.gen_range(1..=n as u64)))
        .collect();
    heights.sort();
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for (k, height) in heights.into_iter().enumerate() {
        active.shuffle(&mut rng);
        let a = active.pop().expect("two active clusters");
        let b = active.pop().expect("two active clusters");
        merges.push(Merge { a: a.min(b), b: a.max(b), height });
        active.push(n + k);
        active.sort_unstable();
    }
    Ok(Dendrogram { leaves: (0..n).map(|i| format!("v{i}")).collect(), merges })
}

/// Deterministic function of `(n, seed)`.
pub fn random_space(n: usize, seed: u64) -> Result<FiniteUltraSpace, DendrogramError> {
    dendrogram_to_space(&random_dendrogram(n, seed)?)
}
