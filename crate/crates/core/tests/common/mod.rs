//! Generators and brute-force oracles shared by the integration targets.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::seq::SliceRandom;
use rand::Rng;
use ultrafix::fixpoint::{check_strictly_nonexpansive, SelfMapTable};
use ultrafix::order::{validate_quasiorder, QuasiOrderedSet};
use ultrafix::spaces::{padic_space, random_space, PAdicModel, DEFAULT_CARRIER_BOUND};
use ultrafix::{Dist, FiniteUltraSpace};

pub fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

/// 200 seeded random spaces with `n = 1 + i % 32`, then every p-adic
/// carrier with `p^N ≤ 243`.
pub fn corpus() -> Vec<FiniteUltraSpace> {
    let mut spaces: Vec<_> = (0..200u64)
        .map(|i| random_space(1 + (i as usize % 32), 1000 + i).expect("generator output is valid"))
        .collect();
    for p in [2u64, 3, 5, 7, 11, 13] {
        let mut n = 1;
        while p.pow(n) <= 243 {
            let model = PAdicModel::new(p, n).unwrap();
            spaces.push(padic_space(&model, DEFAULT_CARRIER_BOUND).unwrap());
            n += 1;
        }
    }
    spaces
}

/// Members of `X[c, r]` computed straight from the matrix.
pub fn brute_ball(space: &FiniteUltraSpace, c: usize, r: &Dist) -> Vec<usize> {
    (0..space.len()).filter(|&x| space.dist(c, x) <= r).collect()
}

/// A random valid quasi-order: weights from `grid`, edges only from higher
/// to lower-or-equal weight, then transitively closed.
pub fn random_quasiorder(n: usize, grid: &[Dist], density: f64, rng: &mut impl Rng) -> QuasiOrderedSet {
    let phi: Vec<Dist> = (0..n).map(|_| grid[rng.gen_range(0..grid.len())].clone()).collect();
    let mut leq = vec![vec![false; n]; n];
    for x in 0..n {
        for y in 0..n {
            leq[x][y] = x == y || (phi[x] >= phi[y] && rng.gen_bool(density));
        }
    }
    for k in 0..n {
        for x in 0..n {
            if leq[x][k] {
                for y in 0..n {
                    if leq[k][y] {
                        leq[x][y] = true;
                    }
                }
            }
        }
    }
    validate_quasiorder(n, leq, phi).expect("closure of a weight-decreasing relation is valid")
}

/// Random weights `k/den` with `0 ≤ k ≤ max`.
pub fn random_weights(n: usize, max: u64, den: u64, rng: &mut impl Rng) -> Vec<Dist> {
    (0..n).map(|_| Dist::ratio(rng.gen_range(0..=max), den)).collect()
}

/// Proposes a map that moves every point closer to a random target, and
/// keeps it only if the exhaustive pair check passes.
pub fn sample_nonexpansive(space: &FiniteUltraSpace, rng: &mut impl Rng) -> Option<SelfMapTable> {
    let n = space.len();
    let v = rng.gen_range(0..n);
    let image: Vec<usize> = (0..n)
        .map(|x| {
            let closer: Vec<usize> = (0..n).filter(|&y| space.dist(y, v) < space.dist(x, v)).collect();
            if x == v || closer.is_empty() {
                v
            } else {
                *closer.choose(rng).unwrap()
            }
        })
        .collect();
    let map = SelfMapTable::new(space.clone(), image).ok()?;
    check_strictly_nonexpansive(&map).holds().then_some(map)
}

/// `f(x) mod m` with plain `i128` arithmetic.
pub fn poly_mod(f: &[i64], x: i128, m: i128) -> i128 {
    f.iter().rev().fold(0i128, |acc, &c| (acc * x + c as i128).rem_euclid(m))
}

/// All roots of `f` mod `p^n` congruent to `x0` mod `p`, by enumeration.
pub fn brute_roots(f: &[i64], p: u64, n: u32, x0: i64) -> Vec<u64> {
    let m = p.pow(n) as i128;
    let r = (x0 as i128).rem_euclid(p as i128);
    (0..m)
        .filter(|&x| x % p as i128 == r && poly_mod(f, x, m) == 0)
        .map(|x| x as u64)
        .collect()
}
