#![allow(clippy::needless_range_loop)]

mod common;

use common::{brute_ball, brute_roots, random_quasiorder, random_weights, sample_nonexpansive};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ultrafix::fixpoint::{banach_fixpoint, hensel_solve, ultra_fixpoint, FixError};
use ultrafix::order::{
    bb_maximal, bb_maximal_with, beta, brute_maximal_set, validate_quasiorder, validate_strict_order, zorn_maximal,
    SuccessorRule,
};
use ultrafix::spaces::{
    dendrogram_to_space, padic_dist, padic_space, random_dendrogram, random_space, Dendrogram, Merge, PAdicModel,
    DEFAULT_CARRIER_BOUND,
};
use ultrafix::ultra::{
    ball_compare, check_ultrametric, intersect_ball_chain, recenter_invariance, BallRelation, Isosceles,
};
use ultrafix::variational::{brondsted_leq, brondsted_order, evp_point, evp_verify, WeightedSpace};
use ultrafix::{Dist, FiniteUltraSpace};

fn space_strategy(max_n: usize) -> impl Strategy<Value = FiniteUltraSpace> {
    (1..=max_n, any::<u64>()).prop_map(|(n, seed)| random_space(n, seed).unwrap())
}

fn model_strategy() -> impl Strategy<Value = PAdicModel> {
    prop_oneof![Just(2u64), Just(3), Just(5), Just(7)]
        .prop_flat_map(|p| {
            let max = (1u32..).take_while(|&n| p.pow(n) <= 128).last().unwrap();
            (Just(p), 1..=max)
        })
        .prop_map(|(p, n)| PAdicModel::new(p, n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn isosceles_on_random_spaces(s in space_strategy(24)) {
        let n = s.len();
        for x in 0..n { for y in 0..n { for z in 0..n {
            let (a, b) = (s.dist(x, y), s.dist(y, z));
            if a != b {
                prop_assert_eq!(s.dist(x, z), a.max_of(b));
                prop_assert_eq!(s.isosceles_at(x, y, z), Isosceles::Holds);
            }
        }}}
    }

    #[test]
    fn balls_nested_or_disjoint(s in space_strategy(16)) {
        let balls = s.all_balls();
        for b1 in &balls {
            let brute = brute_ball(&s, b1.center(), b1.radius());
            prop_assert_eq!(b1.members().ones().collect::<Vec<_>>(), brute);
            for b2 in &balls {
                let rel = ball_compare(b1, b2).unwrap();
                let m1 = b1.members();
                let m2 = b2.members();
                let expected = if m1 == m2 {
                    BallRelation::Equal
                } else if m1.is_disjoint(m2) {
                    BallRelation::Disjoint
                } else if m1.is_subset(m2) {
                    prop_assert!(b1.radius() < b2.radius());
                    BallRelation::FirstInsideSecond
                } else {
                    prop_assert!(m2.is_subset(m1));
                    BallRelation::SecondInsideFirst
                };
                prop_assert_eq!(rel, expected);
            }
        }
    }

    #[test]
    fn smaller_ball_at_inner_point_is_inside(s in space_strategy(16), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radii = s.radius_candidates();
        for _ in 0..32 {
            let b = rng.gen_range(0..s.len());
            let outer_r = &radii[rng.gen_range(0..radii.len())];
            let outer = s.ball(b, outer_r.clone());
            for a in outer.members().ones() {
                prop_assert!(recenter_invariance(&outer, a).unwrap());
                for r in radii.iter().filter(|r| *r <= outer_r) {
                    prop_assert!(s.ball(a, r.clone()).members().is_subset(outer.members()));
                }
            }
        }
    }

    #[test]
    fn descending_chains_have_nonempty_intersection(s in space_strategy(20), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radii = s.radius_candidates();
        let mut center = rng.gen_range(0..s.len());
        let mut chain = Vec::new();
        for r in radii.iter().rev() {
            let ball = s.ball(center, r.clone());
            let members: Vec<usize> = ball.members().ones().collect();
            chain.push(ball);
            center = members[rng.gen_range(0..members.len())];
        }
        let result = intersect_ball_chain(&chain).unwrap();
        let w = result.witness.unwrap();
        prop_assert!(chain.iter().all(|b| b.contains(w)));
    }

    #[test]
    fn dist_normalization(a in 0u64..1000, b in 1u64..1000, k in 1u64..50) {
        let x = Dist::ratio(a * k, b * k);
        prop_assert_eq!(&x, &Dist::ratio(a, b));
        prop_assert!(x.is_normalized());
        let reparsed: Dist = x.to_string().parse().unwrap();
        prop_assert_eq!(reparsed, x);
    }

    #[test]
    fn random_space_is_pure_and_valid(n in 1usize..=64, seed in any::<u64>()) {
        let s = random_space(n, seed).unwrap();
        prop_assert_eq!(&s, &random_space(n, seed).unwrap());
        let rows = s.matrix().rows();
        prop_assert!(check_ultrametric(s.labels().to_vec(), rows).is_ok());
    }

    #[test]
    fn padic_valuation_identity(model in model_strategy()) {
        let m = model.modulus();
        for a in 0..m { for b in 0..m { for c in 0..m {
            let v = |x, y| model.valuation(model.sub(x, y));
            prop_assert!(v(a, c) >= v(a, b).min(v(b, c)));
        }}}
        let s = padic_space(&model, DEFAULT_CARRIER_BOUND).unwrap();
        prop_assert_eq!(s.len() as u64, m);
    }

    #[test]
    fn padic_distance_is_translation_and_unit_invariant(model in model_strategy(), t in any::<u64>(), u in 0u64..1000) {
        let m = model.modulus();
        let t = t % m;
        let unit = model.reduce((u * model.p() + 1) as i128);
        for a in 0..m { for b in 0..m {
            let d = padic_dist(&model, a, b);
            prop_assert_eq!(&padic_dist(&model, model.add(a, t), model.add(b, t)), &d);
            prop_assert_eq!(&padic_dist(&model, model.mul(a, unit), model.mul(b, unit)), &d);
        }}
    }

    #[test]
    fn dendrogram_relabeling_permutes_matrix(n in 1usize..=24, seed in any::<u64>(), perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let d = random_dendrogram(n, seed).unwrap();
        let mut pi: Vec<usize> = (0..n).collect();
        pi.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        let mut leaves = vec![String::new(); n];
        for (i, l) in d.leaves.iter().enumerate() {
            leaves[pi[i]] = l.clone();
        }
        let relabel = |id: usize| if id < n { pi[id] } else { id };
        let merges = d.merges.iter().map(|m| Merge { a: relabel(m.a), b: relabel(m.b), height: m.height.clone() }).collect();
        let s = dendrogram_to_space(&d).unwrap();
        let t = dendrogram_to_space(&Dendrogram { leaves, merges }).unwrap();
        for i in 0..n { for j in 0..n {
            prop_assert_eq!(t.dist(pi[i], pi[j]), s.dist(i, j));
        }}
    }

    #[test]
    fn maximal_matches_oracle(n in 1usize..=64, seed in any::<u64>(), density in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid: Vec<Dist> = (0..6).map(|k| Dist::ratio(k, 4)).collect();
        let q = random_quasiorder(n, &grid, density, &mut rng);
        let maximal = brute_maximal_set(&q);
        for u in 0..n {
            for rule in [SuccessorRule::MinimalWeight, SuccessorRule::FirstAdmissible] {
                let r = bb_maximal_with(&q, u, rule).unwrap();
                prop_assert!(maximal.contains(&r.element));
                prop_assert!(q.leq(u, r.element));
                for w in r.chain.windows(2) {
                    prop_assert!(q.phi()[w[1]] < q.phi()[w[0]].midpoint(&beta(&q, w[0])));
                }
                prop_assert!(r.steps <= q.distinct_weights());
                prop_assert!(r.verify(&q).is_ok());
            }
        }
    }

    #[test]
    fn constant_weight_fixes_every_start(n in 1usize..=12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_quasiorder(n, &[Dist::one()], 0.4, &mut rng);
        for u in 0..n {
            prop_assert_eq!(bb_maximal(&q, u).unwrap().element, u);
        }
    }

    #[test]
    fn zorn_result_has_empty_strict_section(n in 1usize..=24, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // x < y only for x < y as integers: a random suborder of the chain, closed
        let mut lt = vec![vec![false; n]; n];
        for x in 0..n { for y in x + 1..n { lt[x][y] = rng.gen_bool(0.3); } }
        for k in 0..n { for x in 0..n { for y in 0..n {
            if lt[x][k] && lt[k][y] { lt[x][y] = true; }
        }}}
        let s = validate_strict_order(n, lt.clone(), None).unwrap();
        for u in 0..n {
            let v = zorn_maximal(&s, u).unwrap();
            prop_assert!(u == v || lt[u][v]);
            prop_assert!((0..n).all(|y| !lt[v][y]));
        }
    }

    #[test]
    fn evp_point_verifies(s in space_strategy(48), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = WeightedSpace::new(&s, random_weights(s.len(), 12, 4, &mut rng)).unwrap();
        for u in 0..s.len() {
            let r = evp_point(&w, u).unwrap();
            prop_assert!(evp_verify(&w, u, r.point));
            prop_assert!(w.phi()[u] >= w.phi()[r.point]);
        }
    }

    #[test]
    fn brondsted_order_is_antisymmetric(s in space_strategy(24), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = WeightedSpace::new(&s, random_weights(s.len(), 8, 3, &mut rng)).unwrap();
        let order = brondsted_order(&w).unwrap();
        for x in 0..s.len() { for y in 0..s.len() {
            if x != y { prop_assert!(!(order.leq(x, y) && order.leq(y, x))); }
        }}
    }

    #[test]
    fn evp_shift_invariance(s in space_strategy(24), seed in any::<u64>(), c in 0u64..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_weights(s.len(), 8, 3, &mut rng);
        let shift = Dist::ratio(c, 7);
        let shifted: Vec<Dist> = phi.iter().map(|p| p + &shift).collect();
        let w = WeightedSpace::new(&s, phi).unwrap();
        let w2 = WeightedSpace::new(&s, shifted).unwrap();
        for x in 0..s.len() {
            for y in 0..s.len() {
                prop_assert_eq!(brondsted_leq(&w, x, y), brondsted_leq(&w2, x, y));
            }
            prop_assert_eq!(evp_point(&w, x).unwrap().point, evp_point(&w2, x).unwrap().point);
        }
    }

    #[test]
    fn sampled_maps_have_unique_certified_fixed_points(s in space_strategy(10), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if let Some(map) = sample_nonexpansive(&s, &mut rng) {
            for start in 0..s.len() {
                let r = ultra_fixpoint(&map, start).unwrap();
                prop_assert_eq!(map.apply(r.point), r.point);
                prop_assert_eq!(map.fixed_points(), vec![r.point]);
                prop_assert!(r.certificate.verify_on(&map).is_ok());
                let radii: Vec<&Dist> = r.certificate.chain.iter().map(|b| &b.radius).collect();
                prop_assert!(radii.windows(2).all(|w| w[1] < w[0]));
            }
        }
    }

    #[test]
    fn banach_rate_on_affine_maps(n in 1u32..=5, b in any::<i64>(), k in 1u64..9) {
        let model = PAdicModel::new(3, n).unwrap();
        let s = padic_space(&model, DEFAULT_CARRIER_BOUND).unwrap();
        let a = model.reduce((3 * k) as i128);
        let b = model.reduce(b as i128);
        let map = ultrafix::fixpoint::SelfMapTable::from_fn(s, |x| model.add(model.mul(a, x as u64), b) as usize).unwrap();
        let r = banach_fixpoint(&map, &Dist::ratio(1, 3), 0, &Dist::zero()).unwrap();
        prop_assert!(r.rate_holds() && r.exact);
        prop_assert!(r.fix.iterations <= n as usize);
    }

    #[test]
    fn hensel_matches_enumeration(
        p in prop_oneof![Just(3u64), Just(5), Just(7), Just(11), Just(13)],
        coeffs in proptest::collection::vec(-20i64..20, 2..5),
        n in 1u32..6,
    ) {
        prop_assume!(p.pow(n) <= 20_000);
        let model = PAdicModel::new(p, n).unwrap();
        for x0 in 0..p as i64 {
            let brute = brute_roots(&coeffs, p, n, x0);
            match hensel_solve(&coeffs, &model, x0) {
                Ok(r) => prop_assert_eq!(brute, vec![r.point]),
                Err(FixError::NotARootModP) => prop_assert!(brute.is_empty()),
                Err(FixError::SingularSeed) => {}
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}

#[test]
fn exhaustive_small_quasiorders() {
    // every reflexive relation on 3 points, weights from {0, 1/2, 1}
    let grid = [Dist::zero(), Dist::ratio(1, 2), Dist::one()];
    let n = 3;
    let off: Vec<(usize, usize)> = (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).filter(|(x, y)| x != y).collect();
    let mut checked = 0;
    for mask in 0u32..(1 << off.len()) {
        let mut leq = vec![vec![false; n]; n];
        (0..n).for_each(|x| leq[x][x] = true);
        for (bit, &(x, y)) in off.iter().enumerate() {
            leq[x][y] = mask >> bit & 1 == 1;
        }
        for w in 0..27 {
            let phi: Vec<Dist> = (0..n).map(|i| grid[w / 3usize.pow(i as u32) % 3].clone()).collect();
            let Ok(q) = validate_quasiorder(n, leq.clone(), phi) else { continue };
            let maximal = brute_maximal_set(&q);
            for u in 0..n {
                let r = bb_maximal(&q, u).unwrap();
                assert!(maximal.contains(&r.element) && q.leq(u, r.element));
                r.verify(&q).unwrap();
            }
            checked += 1;
        }
    }
    assert!(checked > 100);
}
