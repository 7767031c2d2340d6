//! The Brøndsted order `x ⪯ y ⟺ d(x,y) ≤ φ(x) − φ(y)` and Ekeland points.
//!
//! An Ekeland point for a start `u` is a `v` with
//!
//! ```text
//! d(u,v) ≤ φ(u) − φ(v)                  (so φ(u) ≥ φ(v))
//! d(v,x) > φ(v) − φ(x)   for every x ≠ v
//! ```
//!
//! On a finite space completeness of the metric and lower semicontinuity of
//! `φ` hold automatically, and the maximal elements of the Brøndsted order
//! above `u` are exactly these points. [`evp_point`] finds one with the
//! descent from [`crate::order`]; [`evp_verify`] checks the two conditions
//! directly and does not touch the order module.

use serde::Serialize;
use thiserror::Error;

use crate::dist::Dist;
use crate::order::{bb_maximal, OrderError, QuasiOrderedSet};
use crate::ultra::{Axiom, DistMatrix, FiniteUltraSpace, SpaceError, ValidationReport, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VariationalError {
    #[error("weight vector has {len} entries for {n} points")]
    WeightShape { n: usize, len: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("Brøndsted relation failed validation: {0}")]
    Inconsistent(OrderError),
    #[error(transparent)]
    Order(OrderError),
}

/// Validates a plain metric: identity, symmetry and the ordinary triangle
/// inequality. Used only when a caller opts out of the ultrametric check.
pub fn check_metric(matrix: DistMatrix) -> Result<DistMatrix, SpaceError> {
    if let Err(SpaceError::Invalid(report)) = FiniteUltraSpace::from_matrix(matrix.clone()) {
        let mut violations: Vec<Violation> = report
            .violations
            .into_iter()
            .filter(|v| v.axiom != Axiom::UltraTriangle)
            .collect();
        let n = matrix.len();
        'scan: for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let via = matrix.get(i, j) + matrix.get(j, k);
                    if matrix.get(i, k) > &via {
                        let labels: Vec<String> = [i, j, k].iter().map(|&x| matrix.label(x).to_string()).collect();
                        violations.push(Violation {
                            axiom: Axiom::Triangle,
                            witness: vec![i, j, k],
                            detail: format!("d({},{}) = {} > {}", labels[0], labels[2], matrix.get(i, k), via),
                            labels,
                        });
                        break 'scan;
                    }
                }
            }
        }
        if !violations.is_empty() {
            return Err(SpaceError::Invalid(ValidationReport { violations }));
        }
    }
    Ok(matrix)
}

/// A finite metric space with a nonnegative weight on its points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedSpace {
    matrix: DistMatrix,
    phi: Vec<Dist>,
}

impl WeightedSpace {
    pub fn new(space: &FiniteUltraSpace, phi: Vec<Dist>) -> Result<Self, VariationalError> {
        Self::from_checked(space.matrix().clone(), phi)
    }

    /// Accepts any matrix satisfying the ordinary triangle inequality.
    pub fn from_metric(matrix: DistMatrix, phi: Vec<Dist>) -> Result<Self, VariationalError> {
        Self::from_checked(check_metric(matrix)?, phi)
    }

    fn from_checked(matrix: DistMatrix, phi: Vec<Dist>) -> Result<Self, VariationalError> {
        if phi.len() != matrix.len() {
            return Err(VariationalError::WeightShape { n: matrix.len(), len: phi.len() });
        }
        Ok(WeightedSpace { matrix, phi })
    }

    pub fn matrix(&self) -> &DistMatrix {
        &self.matrix
    }

    pub fn phi(&self) -> &[Dist] {
        &self.phi
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `d(x,y) ≤ φ(x) − φ(y)`, evaluated as `d(x,y) + φ(y) ≤ φ(x)`.
pub fn brondsted_leq(w: &WeightedSpace, x: usize, y: usize) -> bool {
    (w.matrix.get(x, y) + &w.phi[y]) <= w.phi[x]
}

/// The Brøndsted relation as a validated quasi-order weighted by `φ`.
pub fn brondsted_order(w: &WeightedSpace) -> Result<QuasiOrderedSet, VariationalError> {
    let n = w.len();
    let leq = (0..n * n).map(|i| brondsted_leq(w, i / n, i % n)).collect();
    QuasiOrderedSet::from_flat(n, leq, w.phi.clone()).map_err(VariationalError::Inconsistent)
}

/// One instance of the separation condition `d(v,x) > φ(v) − φ(x)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeparationCheck {
    pub x: usize,
    pub holds: bool,
}

/// The exact checks backing an Ekeland point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EkelandRecord {
    pub start: usize,
    pub point: usize,
    /// `d(u,v) ≤ φ(u) − φ(v)`.
    pub descent: bool,
    /// `d(v,x) > φ(v) − φ(x)` for every `x ≠ v`.
    pub separation: Vec<SeparationCheck>,
    /// Elements visited by the maximal-element descent.
    pub chain: Vec<usize>,
}

impl EkelandRecord {
    pub fn holds(&self) -> bool {
        self.descent && self.separation.iter().all(|c| c.holds)
    }
}

fn descent_holds(w: &WeightedSpace, u: usize, v: usize) -> bool {
    brondsted_leq(w, u, v)
}

fn separated(w: &WeightedSpace, v: usize, x: usize) -> bool {
    // d(v,x) > φ(v) − φ(x)  ⟺  d(v,x) + φ(x) > φ(v)
    (w.matrix.get(v, x) + &w.phi[x]) > w.phi[v]
}

/// Ekeland point for `u` using a precomputed Brøndsted order.
pub fn evp_point_in(
    w: &WeightedSpace,
    order: &QuasiOrderedSet,
    u: usize,
) -> Result<EkelandRecord, VariationalError> {
    let report = bb_maximal(order, u).map_err(VariationalError::Order)?;
    let v = report.element;
    let separation = (0..w.len())
        .filter(|&x| x != v)
        .map(|x| SeparationCheck { x, holds: separated(w, v, x) })
        .collect();
    Ok(EkelandRecord {
        start: u,
        point: v,
        descent: descent_holds(w, u, v),
        separation,
        chain: report.chain,
    })
}

/// Ekeland point for `u`: the maximal element of the Brøndsted order above
/// `u`, with every defining inequality recorded.
pub fn evp_point(w: &WeightedSpace, u: usize) -> Result<EkelandRecord, VariationalError> {
    w.matrix.check_index(u)?;
    let order = brondsted_order(w)?;
    evp_point_in(w, &order, u)
}

/// Direct check of both Ekeland conditions for the pair `(u, v)`.
pub fn evp_verify(w: &WeightedSpace, u: usize, v: usize) -> bool {
    let n = w.len();
    if u >= n || v >= n {
        return false;
    }
    let d_uv = w.matrix.get(u, v);
    let descent = match w.phi[u].checked_sub(&w.phi[v]) {
        Some(gap) => d_uv <= &gap,
        None => false,
    };
    descent
        && (0..n).filter(|&x| x != v).all(|x| match w.phi[v].checked_sub(&w.phi[x]) {
            Some(gap) => w.matrix.get(v, x) > &gap,
            // a negative right-hand side is beaten by any distance
            None => true,
        })
}
