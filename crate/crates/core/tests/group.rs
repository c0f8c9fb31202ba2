use std::collections::{BTreeMap, HashSet};

use num_rational::Ratio;
use poisson_walks::{Element, GroupSpec};
use proptest::prelude::*;

const CAP: usize = 1_000_000;

fn trees() -> Vec<GroupSpec> {
    vec![
        GroupSpec::free(2).unwrap(),
        GroupSpec::free(3).unwrap(),
        GroupSpec::free_product(vec![2, 2, 2]).unwrap(),
    ]
}

fn all_groups() -> Vec<GroupSpec> {
    let mut g = trees();
    g.push(GroupSpec::free_product(vec![3, 3]).unwrap());
    g.push(GroupSpec::free_product(vec![2, 3, 4]).unwrap());
    g
}

/// Reduces a raw word over `F_k` by brute force: repeatedly cancel adjacent
/// inverse pairs until none is left.
fn free_reduce(raw: &[(u16, i64)]) -> Vec<(u16, i64)> {
    let mut w: Vec<(u16, i64)> = raw.to_vec();
    loop {
        let pos = w.windows(2).position(|p| p[0].0 == p[1].0 && p[0].1 == -p[1].1);
        match pos {
            Some(i) => {
                w.drain(i..i + 2);
            }
            None => return w,
        }
    }
}

#[test]
fn metric_axioms_on_ball_four() {
    for g in all_groups() {
        let ball = g.ball(4, CAP).unwrap();
        for x in &ball {
            for y in &ball {
                let d = g.distance(x, y);
                assert_eq!(d, g.distance(y, x));
                assert_eq!(d == 0, x == y);
            }
        }
        // Triangle inequality on a deterministic thinning of the triples.
        for (i, x) in ball.iter().enumerate().step_by(3) {
            for y in ball.iter().skip(i % 5).step_by(5) {
                for z in ball.iter().skip(i % 7).step_by(7) {
                    assert!(g.distance(x, z) <= g.distance(x, y) + g.distance(y, z));
                }
            }
        }
    }
}

#[test]
fn trees_are_zero_hyperbolic_on_ball_four() {
    for g in trees() {
        let ball = g.ball(4, CAP).unwrap();
        let gp: Vec<Vec<Ratio<i64>>> = ball.iter().map(|x| ball.iter().map(|y| g.gromov_product(x, y)).collect()).collect();
        let n = ball.len();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    assert!(gp[i][j] >= gp[i][k].min(gp[k][j]));
                }
            }
        }
    }
}

#[test]
fn free_sphere_sizes_match_enumeration() {
    for k in [2usize, 3] {
        let g = GroupSpec::free(k).unwrap();
        let spheres = g.spheres(6, CAP).unwrap();
        // Brute force: reduce every word of length <= 6 and bucket by length.
        let letters: Vec<(u16, i64)> = (0..k as u16).flat_map(|i| [(i, 1), (i, -1)]).collect();
        let mut seen: BTreeMap<usize, HashSet<Vec<(u16, i64)>>> = BTreeMap::new();
        let mut frontier: Vec<Vec<(u16, i64)>> = vec![vec![]];
        for _ in 0..6 {
            let mut next = Vec::new();
            for w in &frontier {
                for &l in &letters {
                    let mut v = w.clone();
                    v.push(l);
                    let r = free_reduce(&v);
                    seen.entry(r.len()).or_default().insert(r);
                    next.push(v);
                }
            }
            frontier = next;
        }
        for j in 1..=6 {
            let formula = 2 * k * (2 * k - 1).pow(j as u32 - 1);
            assert_eq!(spheres[j].len(), formula, "F_{k} sphere {j}");
            assert_eq!(seen[&j].len(), formula, "F_{k} brute force sphere {j}");
        }
    }
}

#[test]
fn word_gauge_is_temperate() {
    for g in all_groups() {
        let s = g.num_generators().max(1);
        let bound = ((2 * s).saturating_sub(1).max(2) as f64).ln() + 1.0;
        let spheres = g.spheres(6, CAP).unwrap();
        let mut card = 0usize;
        for (k, sphere) in spheres.iter().enumerate().skip(1) {
            card += sphere.len();
            assert!((card as f64).ln() / k as f64 <= bound, "{:?} k={k}", g.kind());
        }
    }
}

fn raw_word(gens: u16, max_len: usize) -> impl Strategy<Value = Vec<(u16, i64)>> {
    prop::collection::vec((0..gens, prop::sample::select(vec![-2i64, -1, 1, 2, 3])), 0..max_len)
}

proptest! {
    #[test]
    fn reduction_is_idempotent(raw in raw_word(3, 20)) {
        for g in [GroupSpec::free(3).unwrap(), GroupSpec::free_product(vec![2, 3, 4]).unwrap()] {
            let x = g.reduce(raw.iter().copied()).unwrap();
            let again = g.reduce(x.letters().iter().map(|l| (l.gen, i64::from(l.exp)))).unwrap();
            prop_assert_eq!(&again, &x);
            prop_assert_eq!(g.element(x.letters().to_vec()).unwrap(), x.clone());
        }
    }

    #[test]
    fn free_reduction_matches_cancellation(raw in prop::collection::vec((0u16..2, prop::sample::select(vec![-1i64, 1])), 0..24)) {
        let g = GroupSpec::free(2).unwrap();
        let x = g.reduce(raw.iter().copied()).unwrap();
        let brute = free_reduce(&raw);
        prop_assert_eq!(x.len(), brute.len());
        let got: Vec<(u16, i64)> = x.letters().iter().map(|l| (l.gen, i64::from(l.exp))).collect();
        prop_assert_eq!(got, brute);
    }

    #[test]
    fn group_laws(a in raw_word(3, 10), b in raw_word(3, 10), c in raw_word(3, 10)) {
        for g in [GroupSpec::free(3).unwrap(), GroupSpec::free_product(vec![2, 3, 4]).unwrap()] {
            let (x, y, z) = (g.reduce(a.clone()).unwrap(), g.reduce(b.clone()).unwrap(), g.reduce(c.clone()).unwrap());
            prop_assert_eq!(g.multiply(&g.multiply(&x, &y), &z), g.multiply(&x, &g.multiply(&y, &z)));
            prop_assert!(g.multiply(&x, &g.inverse(&x)).is_identity());
            prop_assert_eq!(g.word_length(&g.inverse(&x)), g.word_length(&x));
            prop_assert!(g.word_length(&g.multiply(&x, &y)) <= g.word_length(&x) + g.word_length(&y));
            prop_assert_eq!(g.parse(&g.format(&x)).unwrap(), x.clone());
            prop_assert_eq!(g.multiply(&Element::identity(), &x), x.clone());
        }
    }

    #[test]
    fn relabeling_preserves_length_and_products(a in raw_word(2, 12), b in raw_word(2, 12), swap in any::<bool>(), inv0 in any::<bool>()) {
        let g = GroupSpec::free(2).unwrap();
        let perm: Vec<u16> = if swap { vec![1, 0] } else { vec![0, 1] };
        let invert = vec![inv0, false];
        let (x, y) = (g.reduce(a).unwrap(), g.reduce(b).unwrap());
        let (fx, fy) = (g.relabel(&x, &perm, &invert), g.relabel(&y, &perm, &invert));
        prop_assert_eq!(g.word_length(&fx), g.word_length(&x));
        prop_assert_eq!(g.relabel(&g.multiply(&x, &y), &perm, &invert), g.multiply(&fx, &fy));
    }
}
