//! Fixed points of self-maps on ultrametric spaces, with certificates.
//!
//! For a strictly nonexpansive map (`d(Tx,Ty) < d(x,y)` whenever `x ≠ y`)
//! the Picard iterates `a_{n+1} = T a_n` produce balls
//! `B_n = X[a_n, d(a_n, T a_n)]` with
//!
//! ```text
//! B_{n+1} ⊊ B_n,   a_{n+1} ∈ B_n,   a_n ∉ B_{n+1},   r_{n+1} < r_n
//! ```
//!
//! On a finite carrier the radii can only drop finitely often, so the chain
//! ends at a ball of radius 0 whose center is fixed. The recorded chain is
//! the [`DescentCertificate`]; it can be re-checked without the solver.

use std::collections::HashSet;
use std::hash::Hash;

use serde::Serialize;
use thiserror::Error;

use crate::dist::Dist;
use crate::spaces::{padic_space, ModelError, PAdicModel, DEFAULT_CARRIER_BOUND};
use crate::ultra::{
    ball_compare, strict_inclusion_implies_smaller_radius, BallRelation, DistMatrix, FiniteUltraSpace,
    SpaceError,
};

/// A pair of points, by index and label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairWitness {
    pub x: usize,
    pub y: usize,
    pub x_label: String,
    pub y_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertificateError {
    #[error("certificate is empty")]
    Empty,
    #[error("certificate entry {step}: {reason}")]
    Step { step: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixError {
    #[error("image has {found} entries for {expected} points")]
    ImageLength { expected: usize, found: usize },
    #[error("image of point {index} is {value}, outside the space")]
    ImageOutOfRange { index: usize, value: usize },
    #[error("start point {0} is outside the space")]
    StartOutOfRange(String),
    #[error("map is not strictly nonexpansive at ({}, {})", .0.x_label, .0.y_label)]
    NotStrictlyNonexpansive(PairWitness),
    #[error("map is not contractive with the given factor at ({}, {})", .0.x_label, .0.y_label)]
    NotContractive(PairWitness),
    #[error("contraction factor {0} must be below 1")]
    AlphaNotBelowOne(Dist),
    #[error("not a root mod p")]
    NotARootModP,
    #[error("singular seed")]
    SingularSeed,
    #[error("affine map needs coefficients [b, a], found {0} coefficients")]
    AffineShape(usize),
    #[error("affine coefficient {0} is a unit; the map is not a contraction")]
    AffineNotContracting(u64),
    #[error("iteration did not reach a fixed point within {0} steps")]
    DidNotConverge(usize),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// A self-map of a finite ultrametric space, given by its table of images.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelfMapTable {
    space: FiniteUltraSpace,
    image: Vec<usize>,
}

impl SelfMapTable {
    pub fn new(space: FiniteUltraSpace, image: Vec<usize>) -> Result<Self, FixError> {
        if image.len() != space.len() {
            return Err(FixError::ImageLength { expected: space.len(), found: image.len() });
        }
        if let Some((index, &value)) = image.iter().enumerate().find(|(_, &v)| v >= space.len()) {
            return Err(FixError::ImageOutOfRange { index, value });
        }
        Ok(SelfMapTable { space, image })
    }

    pub fn from_fn(space: FiniteUltraSpace, f: impl Fn(usize) -> usize) -> Result<Self, FixError> {
        let image = (0..space.len()).map(f).collect();
        Self::new(space, image)
    }

    pub fn space(&self) -> &FiniteUltraSpace {
        &self.space
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.image[x]
    }

    /// Radius of the ball attached to `x`: `d(x, Tx)`.
    pub fn displacement(&self, x: usize) -> &Dist {
        self.space.dist(x, self.image[x])
    }

    pub fn fixed_points(&self) -> Vec<usize> {
        (0..self.image.len()).filter(|&x| self.image[x] == x).collect()
    }

    fn witness(&self, x: usize, y: usize) -> PairWitness {
        PairWitness {
            x,
            y,
            x_label: self.space.label(x).to_string(),
            y_label: self.space.label(y).to_string(),
        }
    }

    fn first_pair(&self, bad: impl Fn(usize, usize) -> bool) -> Option<PairWitness> {
        let n = self.space.len();
        (0..n)
            .flat_map(|x| (x + 1..n).map(move |y| (x, y)))
            .find(|&(x, y)| bad(x, y))
            .map(|(x, y)| self.witness(x, y))
    }
}

/// Result of an exhaustive pair scan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairCheck {
    Yes,
    Witness(PairWitness),
}

impl PairCheck {
    pub fn holds(&self) -> bool {
        matches!(self, PairCheck::Yes)
    }
}

/// `d(Tx,Ty) < d(x,y)` for every pair of distinct points.
pub fn check_strictly_nonexpansive(map: &SelfMapTable) -> PairCheck {
    let s = &map.space;
    match map.first_pair(|x, y| s.dist_rank(map.apply(x), map.apply(y)) >= s.dist_rank(x, y)) {
        None => PairCheck::Yes,
        Some(w) => PairCheck::Witness(w),
    }
}

/// `d(Tx,Ty) ≤ alpha · d(x,y)` for every pair.
pub fn check_contractive(map: &SelfMapTable, alpha: &Dist) -> PairCheck {
    let s = &map.space;
    match map.first_pair(|x, y| s.dist(map.apply(x), map.apply(y)) > &(alpha * s.dist(x, y))) {
        None => PairCheck::Yes,
        Some(w) => PairCheck::Witness(w),
    }
}

/// One ball `X[center, radius]` of a descent certificate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CertificateBall<P> {
    pub center: P,
    pub radius: Dist,
}

/// Strictly nested balls ending at a fixed point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DescentCertificate<P> {
    pub chain: Vec<CertificateBall<P>>,
    pub final_point: P,
}

fn step_err(step: usize, reason: impl Into<String>) -> CertificateError {
    CertificateError::Step { step, reason: reason.into() }
}

impl<P: Clone + PartialEq + std::fmt::Debug> DescentCertificate<P> {
    /// Checks the certificate using only the metric and the map.
    ///
    /// Inclusion of consecutive balls follows from `a_{n+1} ∈ B_n` and
    /// `r_{n+1} ≤ r_n`; strictness is witnessed by `a_n ∉ B_{n+1}`.
    pub fn verify_metric(
        &self,
        dist: impl Fn(&P, &P) -> Dist,
        map: impl Fn(&P) -> P,
    ) -> Result<(), CertificateError> {
        let last = self.chain.last().ok_or(CertificateError::Empty)?;
        for (step, ball) in self.chain.iter().enumerate() {
            if ball.radius != dist(&ball.center, &map(&ball.center)) {
                return Err(step_err(step, "radius differs from the displacement of the center"));
            }
        }
        for (step, pair) in self.chain.windows(2).enumerate() {
            let (outer, inner) = (&pair[0], &pair[1]);
            let gap = dist(&outer.center, &inner.center);
            if gap > outer.radius {
                return Err(step_err(step + 1, "center lies outside the previous ball"));
            }
            if inner.radius >= outer.radius {
                return Err(step_err(step + 1, "radius did not decrease"));
            }
            if gap <= inner.radius {
                return Err(step_err(step + 1, "inclusion is not strict"));
            }
        }
        self.verify_end(last, &map)
    }

    fn verify_end(&self, last: &CertificateBall<P>, map: impl Fn(&P) -> P) -> Result<(), CertificateError> {
        let step = self.chain.len() - 1;
        if !last.radius.is_zero() {
            return Err(step_err(step, "final radius is not 0"));
        }
        if last.center != self.final_point {
            return Err(step_err(step, "final ball is not centered at the reported point"));
        }
        if map(&self.final_point) != self.final_point {
            return Err(step_err(step, "reported point is not fixed"));
        }
        Ok(())
    }

    pub fn radii_strictly_decrease(&self) -> bool {
        self.chain.windows(2).all(|p| p[1].radius < p[0].radius)
    }
}

impl DescentCertificate<usize> {
    /// Re-checks the chain through the member-set algebra of the space.
    pub fn verify_on(&self, map: &SelfMapTable) -> Result<(), CertificateError> {
        let space = map.space();
        let n = space.len();
        if self.chain.iter().any(|b| b.center >= n) || self.final_point >= n {
            return Err(step_err(0, "center outside the space"));
        }
        self.verify_metric(|&a, &b| space.dist(a, b).clone(), |&x| map.apply(x))?;
        let balls: Vec<_> = self
            .chain
            .iter()
            .map(|b| space.ball(b.center, b.radius.clone()))
            .collect();
        for (step, pair) in balls.windows(2).enumerate() {
            match ball_compare(&pair[1], &pair[0]) {
                Ok(BallRelation::FirstInsideSecond) => {}
                Ok(other) => return Err(step_err(step + 1, format!("balls are {other:?}, not strictly nested"))),
                Err(e) => return Err(step_err(step + 1, e.to_string())),
            }
            match strict_inclusion_implies_smaller_radius(&pair[1], &pair[0]) {
                Ok(true) => {}
                Ok(false) => return Err(step_err(step + 1, "strict inclusion without smaller radius")),
                Err(e) => return Err(step_err(step + 1, e.to_string())),
            }
            if !pair[0].contains(self.chain[step + 1].center) {
                return Err(step_err(step + 1, "center lies outside the previous ball"));
            }
        }
        Ok(())
    }
}

impl DescentCertificate<u64> {
    /// Re-checks a p-adic chain on residue classes: `X[a, r]` is the class
    /// of `a` modulo `p^k` for the level `k` of `r`.
    pub fn verify_padic(&self, model: &PAdicModel, map: impl Fn(u64) -> u64) -> Result<(), CertificateError> {
        self.verify_metric(|&a, &b| model.dist(a, b), |&x| map(x))?;
        for (step, pair) in self.chain.windows(2).enumerate() {
            let outer = (pair[0].center, &pair[0].radius);
            let inner = (pair[1].center, &pair[1].radius);
            if !model.ball_within(inner, outer) || model.ball_within(outer, inner) {
                return Err(step_err(step + 1, "residue classes are not strictly nested"));
            }
        }
        Ok(())
    }
}

/// How uniqueness of the fixed point was established.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Uniqueness {
    /// Every point of the carrier was tested.
    FixScan { fixed_points: usize },
    /// The map contracts the region it was iterated on, so two fixed points
    /// there would have to be at distance 0.
    ContractionBound,
}

impl Uniqueness {
    pub fn unique(&self) -> bool {
        match self {
            Uniqueness::FixScan { fixed_points } => *fixed_points == 1,
            Uniqueness::ContractionBound => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FixResult<P> {
    pub point: P,
    pub certificate: DescentCertificate<P>,
    pub iterations: usize,
    pub uniqueness: Uniqueness,
}

/// Records `X[a_n, d(a_n, a_{n+1})]` along the Picard orbit until the
/// displacement is at most `tol`.
fn descend<P: Clone + Eq + Hash>(
    start: P,
    step: impl Fn(&P) -> Result<P, FixError>,
    dist: impl Fn(&P, &P) -> Dist,
    tol: &Dist,
    max_steps: usize,
) -> Result<Vec<CertificateBall<P>>, FixError> {
    let mut chain = Vec::new();
    let mut current = start;
    for _ in 0..=max_steps {
        let next = step(&current)?;
        let radius = dist(&current, &next);
        let done = &radius <= tol;
        chain.push(CertificateBall { center: current, radius });
        if done {
            return Ok(chain);
        }
        current = next;
    }
    Err(FixError::DidNotConverge(max_steps))
}

fn start_index(space: &FiniteUltraSpace, start: usize) -> Result<usize, FixError> {
    if start < space.len() {
        Ok(start)
    } else {
        Err(FixError::StartOutOfRange(format!("#{start}")))
    }
}

/// The unique fixed point of a strictly nonexpansive map, reached by ball
/// descent from `start`.
pub fn ultra_fixpoint(map: &SelfMapTable, start: usize) -> Result<FixResult<usize>, FixError> {
    let start = start_index(map.space(), start)?;
    if let PairCheck::Witness(w) = check_strictly_nonexpansive(map) {
        return Err(FixError::NotStrictlyNonexpansive(w));
    }
    let space = map.space();
    let chain = descend(
        start,
        |&x| Ok(map.apply(x)),
        |&a, &b| space.dist(a, b).clone(),
        &Dist::zero(),
        space.distance_values().len(),
    )?;
    let point = chain.last().expect("nonempty chain").center;
    let certificate = DescentCertificate { chain, final_point: point };
    certificate.verify_on(map)?;
    Ok(FixResult {
        point,
        iterations: certificate.chain.len() - 1,
        certificate,
        uniqueness: Uniqueness::FixScan { fixed_points: map.fixed_points().len() },
    })
}

/// One step of the geometric rate check `d(a_n, v) ≤ α^n d(a_0, v)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RateStep {
    pub n: usize,
    pub distance: Dist,
    pub bound: Dist,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BanachResult {
    pub fix: FixResult<usize>,
    pub rate: Vec<RateStep>,
    /// False when the run stopped on the tolerance before reaching radius 0.
    pub exact: bool,
}

impl BanachResult {
    pub fn rate_holds(&self) -> bool {
        self.rate.iter().all(|s| s.holds)
    }
}

/// Picard iteration for an `alpha`-contraction with `alpha < 1`.
///
/// With `radius_tol = 0` the run is exact and ends on the fixed point. A
/// positive tolerance stops as soon as `d(a_n, T a_n) ≤ radius_tol`.
pub fn banach_fixpoint(
    map: &SelfMapTable,
    alpha: &Dist,
    start: usize,
    radius_tol: &Dist,
) -> Result<BanachResult, FixError> {
    if alpha >= &Dist::one() {
        return Err(FixError::AlphaNotBelowOne(alpha.clone()));
    }
    let start = start_index(map.space(), start)?;
    if let PairCheck::Witness(w) = check_contractive(map, alpha) {
        return Err(FixError::NotContractive(w));
    }
    let space = map.space();
    let chain = descend(
        start,
        |&x| Ok(map.apply(x)),
        |&a, &b| space.dist(a, b).clone(),
        radius_tol,
        space.distance_values().len(),
    )?;
    let point = chain.last().expect("nonempty chain").center;
    let exact = chain.last().is_some_and(|b| b.radius.is_zero());
    let initial = space.dist(start, point);
    let rate = chain
        .iter()
        .enumerate()
        .map(|(n, ball)| {
            let distance = space.dist(ball.center, point).clone();
            let bound = &alpha.pow(n as u32) * initial;
            RateStep { n, holds: distance <= bound, distance, bound }
        })
        .collect();
    let certificate = DescentCertificate { chain, final_point: point };
    if exact {
        certificate.verify_on(map)?;
    }
    Ok(BanachResult {
        fix: FixResult {
            point,
            iterations: certificate.chain.len() - 1,
            certificate,
            uniqueness: Uniqueness::FixScan { fixed_points: map.fixed_points().len() },
        },
        rate,
        exact,
    })
}

/// Iterates from `start` until `max_steps` applications or a repeat.
pub fn picard_orbit_by<P: Clone + Eq + Hash>(start: P, step: impl Fn(&P) -> P, max_steps: usize) -> Vec<P> {
    let mut seen = HashSet::from([start.clone()]);
    let mut orbit = vec![start];
    for _ in 0..max_steps {
        let next = step(orbit.last().expect("nonempty"));
        if !seen.insert(next.clone()) {
            break;
        }
        orbit.push(next);
    }
    orbit
}

pub fn picard_orbit(map: &SelfMapTable, start: usize, max_steps: usize) -> Vec<usize> {
    picard_orbit_by(start, |&x| map.apply(x), max_steps)
}

/// How a polynomial over the p-adic model is turned into a self-map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapMode {
    /// `x ↦ x − f(x) / f'(x)`.
    Newton,
    /// Coefficients `[b, a]` read as `x ↦ a·x + b`.
    Affine,
}

/// A polynomial with integer coefficients, constant term first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyMap {
    pub model: PAdicModel,
    pub coefficients: Vec<i64>,
    pub mode: MapMode,
}

impl PolyMap {
    pub fn eval(&self, x: u64) -> u64 {
        let m = &self.model;
        self.coefficients
            .iter()
            .rev()
            .fold(0, |acc, &c| m.add(m.mul(acc, x), m.reduce(c as i128)))
    }

    pub fn eval_derivative(&self, x: u64) -> u64 {
        let m = &self.model;
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0, |acc, (i, &c)| m.add(m.mul(acc, x), m.reduce(c as i128 * i as i128)))
    }

    /// One Newton step; `None` when `f'(x)` is not a unit.
    pub fn newton_step(&self, x: u64) -> Option<u64> {
        let m = &self.model;
        let inv = m.inverse(self.eval_derivative(x))?;
        Some(m.sub(x, m.mul(self.eval(x), inv)))
    }

    /// The self-map this polynomial stands for in its mode.
    pub fn apply(&self, x: u64) -> Option<u64> {
        match self.mode {
            MapMode::Newton => self.newton_step(x),
            MapMode::Affine => Some(self.eval(x)),
        }
    }

    pub fn solve(&self, x0: i64) -> Result<FixResult<u64>, FixError> {
        match self.mode {
            MapMode::Newton => hensel_solve(&self.coefficients, &self.model, x0),
            MapMode::Affine => affine_fixpoint(&self.model, &self.coefficients, x0),
        }
    }
}

/// Lifts a simple root of `f` mod `p` to a root mod `p^N` by iterating the
/// Newton map, which contracts the residue class of `x0`.
pub fn hensel_solve(f: &[i64], model: &PAdicModel, x0: i64) -> Result<FixResult<u64>, FixError> {
    let poly = PolyMap { model: *model, coefficients: f.to_vec(), mode: MapMode::Newton };
    let seed = model.reduce(x0 as i128);
    let p = model.p();
    if !poly.eval(seed).is_multiple_of(p) {
        return Err(FixError::NotARootModP);
    }
    if poly.eval_derivative(seed).is_multiple_of(p) {
        return Err(FixError::SingularSeed);
    }
    let step = |x: &u64| poly.newton_step(*x).ok_or(FixError::SingularSeed);
    // quadratic convergence needs about log2(N) steps; N + 1 is a safe cap
    let chain = descend(seed, step, |&a, &b| model.dist(a, b), &Dist::zero(), model.precision() as usize + 1)?;
    let point = chain.last().expect("nonempty chain").center;
    let certificate = DescentCertificate { chain, final_point: point };
    certificate.verify_padic(model, |x| poly.newton_step(x).unwrap_or(x.wrapping_add(1)))?;
    if poly.eval(point) != 0 || point % p != seed % p {
        return Err(FixError::Certificate(step_err(certificate.chain.len() - 1, "lifted value is not a root")));
    }
    Ok(FixResult {
        point,
        iterations: certificate.chain.len() - 1,
        certificate,
        uniqueness: Uniqueness::ContractionBound,
    })
}

/// Fixed point of `x ↦ a·x + b` with `p | a`, given as `[b, a]`.
///
/// Carriers up to [`DEFAULT_CARRIER_BOUND`] are materialized and solved with
/// [`ultra_fixpoint`], which also scans for other fixed points. Larger ones
/// are iterated on residues directly.
pub fn affine_fixpoint(model: &PAdicModel, coefficients: &[i64], start: i64) -> Result<FixResult<u64>, FixError> {
    let &[b, a] = coefficients else {
        return Err(FixError::AffineShape(coefficients.len()));
    };
    let (a, b) = (model.reduce(a as i128), model.reduce(b as i128));
    if a % model.p() != 0 {
        return Err(FixError::AffineNotContracting(a));
    }
    let start = model.reduce(start as i128);
    let map = |x: u64| model.add(model.mul(a, x), b);
    if model.modulus() <= DEFAULT_CARRIER_BOUND {
        let space = padic_space(model, DEFAULT_CARRIER_BOUND)?;
        let table = SelfMapTable::from_fn(space, |x| map(x as u64) as usize)?;
        let r = ultra_fixpoint(&table, start as usize)?;
        let chain = r
            .certificate
            .chain
            .iter()
            .map(|c| CertificateBall { center: c.center as u64, radius: c.radius.clone() })
            .collect();
        return Ok(FixResult {
            point: r.point as u64,
            certificate: DescentCertificate { chain, final_point: r.point as u64 },
            iterations: r.iterations,
            uniqueness: r.uniqueness,
        });
    }
    let chain = descend(start, |&x| Ok(map(x)), |&x, &y| model.dist(x, y), &Dist::zero(), model.precision() as usize + 1)?;
    let point = chain.last().expect("nonempty chain").center;
    let certificate = DescentCertificate { chain, final_point: point };
    certificate.verify_padic(model, map)?;
    Ok(FixResult {
        point,
        iterations: certificate.chain.len() - 1,
        certificate,
        uniqueness: Uniqueness::ContractionBound,
    })
}

/// The raw matrix of a map's space, for callers that only need distances.
pub fn map_matrix(map: &SelfMapTable) -> &DistMatrix {
    map.space().matrix()
}
