//! JSON file formats. Rationals are written as `"num/den"` or integer
//! strings; plain JSON integers are accepted on input.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::dist::Dist;
use crate::fixpoint::MapMode;
use crate::spaces::{Dendrogram, Merge};
use crate::ultra::{DistMatrix, FiniteUltraSpace, SpaceError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("cannot parse {path}: {reason}")]
    Parse { path: String, reason: String },
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path)
        .map_err(|e| IoError::Read { path: path.display().to_string(), reason: e.to_string() })?;
    serde_json::from_str(&text)
        .map_err(|e| IoError::Parse { path: path.display().to_string(), reason: e.to_string() })
}

/// `{ "labels": [...], "dist": [[...]...] }`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceFile {
    pub labels: Vec<String>,
    pub dist: Vec<Vec<Dist>>,
}

impl SpaceFile {
    pub fn from_space(space: &FiniteUltraSpace) -> Self {
        SpaceFile { labels: space.labels().to_vec(), dist: space.matrix().rows() }
    }

    pub fn into_matrix(self) -> Result<DistMatrix, SpaceError> {
        DistMatrix::new(self.labels, self.dist)
    }
}

/// A space file with an extra `"phi"` weight per point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedFile {
    pub labels: Vec<String>,
    pub dist: Vec<Vec<Dist>>,
    pub phi: Vec<Dist>,
}

/// A relation entry: `0`, `1`, `false` or `true`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bit(pub bool);

impl<'de> Deserialize<'de> for Bit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            B(bool),
            I(u64),
        }
        match Raw::deserialize(d)? {
            Raw::B(b) => Ok(Bit(b)),
            Raw::I(0) => Ok(Bit(false)),
            Raw::I(1) => Ok(Bit(true)),
            Raw::I(other) => Err(serde::de::Error::custom(format!("relation entry must be 0 or 1, found {other}"))),
        }
    }
}

/// `{ "n": int, "leq": [[0|1...]...], "phi": [...] }`, or `"lt"` for a
/// strict order, whose weight is optional.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderFile {
    pub n: usize,
    #[serde(default)]
    pub leq: Option<Vec<Vec<Bit>>>,
    #[serde(default)]
    pub lt: Option<Vec<Vec<Bit>>>,
    #[serde(default)]
    pub phi: Option<Vec<Dist>>,
}

pub fn bits(rows: Vec<Vec<Bit>>) -> Vec<Vec<bool>> {
    rows.into_iter().map(|r| r.into_iter().map(|b| b.0).collect()).collect()
}

/// `{ "image": [int...] }`, indices into the paired space file.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub image: Vec<usize>,
}

/// `{ "p": int, "precision": int }`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub p: u64,
    pub precision: u32,
}

/// `{ "p", "precision", "poly": [int...], "x0", "mode" }`; coefficients run
/// from the constant term up, and `mode` defaults to `"newton"`.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyFile {
    pub p: u64,
    pub precision: u32,
    pub poly: Vec<i64>,
    pub x0: i64,
    #[serde(default = "newton")]
    pub mode: MapMode,
}

fn newton() -> MapMode {
    MapMode::Newton
}

/// `{ "leaves": [...], "merges": [[a, b, "height"]...] }`
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DendrogramFile {
    pub leaves: Vec<String>,
    pub merges: Vec<(usize, usize, Dist)>,
}

impl From<DendrogramFile> for Dendrogram {
    fn from(f: DendrogramFile) -> Self {
        Dendrogram {
            leaves: f.leaves,
            merges: f.merges.into_iter().map(|(a, b, height)| Merge { a, b, height }).collect(),
        }
    }
}

/// `{ "chain": [["center", "radius"]...] }`, outermost ball first.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub chain: Vec<(String, Dist)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::discrete_space;

    #[test]
    fn space_round_trip() {
        let s = discrete_space(3).unwrap();
        let text = serde_json::to_string(&SpaceFile::from_space(&s)).unwrap();
        assert!(text.contains(r#""dist":[["0","1","1"]"#));
        let back: SpaceFile = serde_json::from_str(&text).unwrap();
        assert_eq!(FiniteUltraSpace::from_matrix(back.into_matrix().unwrap()).unwrap(), s);
    }

    #[test]
    fn integers_and_fractions_parse() {
        let f: SpaceFile = serde_json::from_str(r#"{"labels":["a","b"],"dist":[[0,"1/2"],["2/4","0"]]}"#).unwrap();
        assert_eq!(f.dist[1][0], Dist::ratio(1, 2));
        assert!(serde_json::from_str::<SpaceFile>(r#"{"labels":["a"],"dist":[["-1"]]}"#).is_err());
    }

    #[test]
    fn order_file_bits() {
        let f: OrderFile = serde_json::from_str(r#"{"n":2,"leq":[[1,true],[0,1]],"phi":["1","0"]}"#).unwrap();
        assert_eq!(bits(f.leq.unwrap()), vec![vec![true, true], vec![false, true]]);
        assert!(serde_json::from_str::<OrderFile>(r#"{"n":1,"leq":[[2]]}"#).is_err());
        let s: OrderFile = serde_json::from_str(r#"{"n":1,"lt":[[0]]}"#).unwrap();
        assert!(s.phi.is_none() && s.lt.is_some());
    }

    #[test]
    fn poly_and_dendrogram_files() {
        let p: PolyFile = serde_json::from_str(r#"{"p":7,"precision":2,"poly":[-2,0,1],"x0":3}"#).unwrap();
        assert_eq!(p.mode, MapMode::Newton);
        let d: DendrogramFile =
            serde_json::from_str(r#"{"leaves":["a","b"],"merges":[[0,1,"1/2"]]}"#).unwrap();
        let d = Dendrogram::from(d);
        assert_eq!(d.merges[0].height, Dist::ratio(1, 2));
        let c: ChainFile = serde_json::from_str(r#"{"chain":[["a","1"],["a",0]]}"#).unwrap();
        assert_eq!(c.chain[1].1, Dist::zero());
    }
}
