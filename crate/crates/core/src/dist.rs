//! Exact nonnegative rational distances.
//!
//! Every metric value and every weight in the crate is a [`Dist`]. The value
//! is kept in lowest terms with arbitrary-precision parts, so equality and
//! ordering are exact and no rounding ever takes place.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Pow, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Failure to read a rational from text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistParseError {
    #[error("empty rational literal")]
    Empty,
    #[error("negative value `{0}`: distances and weights must be nonnegative")]
    Negative(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
    #[error("malformed rational `{0}` (expected \"num/den\" or an integer)")]
    Malformed(String),
}

/// An exact nonnegative rational number.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dist(Ratio<BigUint>);

impl Dist {
    pub fn zero() -> Self {
        Dist(Ratio::zero())
    }

    pub fn one() -> Self {
        Dist(Ratio::one())
    }

    pub fn from_integer(n: u64) -> Self {
        Dist(Ratio::from_integer(BigUint::from(n)))
    }

    /// `num / den`, reduced. Returns `None` when `den` is zero.
    pub fn new(num: impl Into<BigUint>, den: impl Into<BigUint>) -> Option<Self> {
        let den = den.into();
        if den.is_zero() {
            return None;
        }
        Some(Dist(Ratio::new(num.into(), den)))
    }

    /// Shorthand for small literals; panics on a zero denominator.
    pub fn ratio(num: u64, den: u64) -> Self {
        Self::new(num, den).expect("zero denominator")
    }

    /// `base^-exp`, the distance scale of valuation-type metrics.
    pub fn inverse_power(base: u64, exp: u32) -> Self {
        let den: BigUint = Pow::pow(BigUint::from(base), exp);
        Dist(Ratio::new(BigUint::one(), den))
    }

    pub fn numer(&self) -> &BigUint {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigUint {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// `self - rhs` when the result stays nonnegative.
    pub fn checked_sub(&self, rhs: &Dist) -> Option<Dist> {
        if self.0 >= rhs.0 {
            Some(Dist(&self.0 - &rhs.0))
        } else {
            None
        }
    }

    /// `(self + other) / 2`.
    pub fn midpoint(&self, other: &Dist) -> Dist {
        Dist((&self.0 + &other.0) / Ratio::from_integer(BigUint::from(2u32)))
    }

    pub fn pow(&self, exp: u32) -> Dist {
        Dist(Pow::pow(&self.0, exp))
    }

    pub fn max_of<'a>(&'a self, other: &'a Dist) -> &'a Dist {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Whether the value is the lowest-terms representation (always true for
    /// values produced by this type; exposed for invariant tests).
    pub fn is_normalized(&self) -> bool {
        !self.denom().is_zero() && self.numer().gcd(self.denom()).is_one()
            || self.numer().is_zero() && self.denom().is_one()
    }
}

impl Default for Dist {
    fn default() -> Self {
        Dist::zero()
    }
}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.denom() == other.denom() {
            return self.numer().cmp(other.numer());
        }
        (self.numer() * other.denom()).cmp(&(other.numer() * self.denom()))
    }
}

impl Add for &Dist {
    type Output = Dist;
    fn add(self, rhs: &Dist) -> Dist {
        Dist(&self.0 + &rhs.0)
    }
}

impl Add for Dist {
    type Output = Dist;
    fn add(self, rhs: Dist) -> Dist {
        Dist(self.0 + rhs.0)
    }
}

impl Mul for &Dist {
    type Output = Dist;
    fn mul(self, rhs: &Dist) -> Dist {
        Dist(&self.0 * &rhs.0)
    }
}

impl Mul for Dist {
    type Output = Dist;
    fn mul(self, rhs: Dist) -> Dist {
        Dist(self.0 * rhs.0)
    }
}

impl From<u64> for Dist {
    fn from(n: u64) -> Self {
        Dist::from_integer(n)
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom().is_one() {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl fmt::Debug for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dist({self})")
    }
}

fn parse_natural(part: &str, whole: &str) -> Result<BigUint, DistParseError> {
    let part = part.trim();
    if part.starts_with('-') {
        return Err(DistParseError::Negative(whole.to_string()));
    }
    let digits = part.strip_prefix('+').unwrap_or(part);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(DistParseError::Malformed(whole.to_string()));
    }
    digits
        .parse::<BigUint>()
        .map_err(|_| DistParseError::Malformed(whole.to_string()))
}

impl FromStr for Dist {
    type Err = DistParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text = s.trim();
        if text.is_empty() {
            return Err(DistParseError::Empty);
        }
        let (num, den) = match text.split_once('/') {
            Some((n, d)) => (parse_natural(n, text)?, parse_natural(d, text)?),
            None => (parse_natural(text, text)?, BigUint::one()),
        };
        if den.is_zero() {
            return Err(DistParseError::ZeroDenominator(text.to_string()));
        }
        Ok(Dist(Ratio::new(num, den)))
    }
}

impl Serialize for Dist {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

struct DistVisitor;

impl<'de> Visitor<'de> for DistVisitor {
    type Value = Dist;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a nonnegative rational as \"num/den\", an integer string, or an integer")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Dist, E> {
        v.parse().map_err(E::custom)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Dist, E> {
        Ok(Dist::from_integer(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Dist, E> {
        if v < 0 {
            return Err(E::custom(DistParseError::Negative(v.to_string())));
        }
        Ok(Dist::from_integer(v as u64))
    }
}

impl<'de> Deserialize<'de> for Dist {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(DistVisitor)
    }
}
