use poisson_walks::criteria::{strip_growth, strip_tree};
use poisson_walks::group::geodesic_ray_point;
use poisson_walks::{Element, GroupSpec};
use proptest::prelude::*;

const CAP: usize = 100_000;

fn raw_ray() -> impl Strategy<Value = Vec<(u16, i64)>> {
    prop::collection::vec((0u16..2, prop::sample::select(vec![-1i64, 1])), 40..60)
}

fn rays(a: &[(u16, i64)], b: &[(u16, i64)]) -> Option<(GroupSpec, Element, Element)> {
    let g = GroupSpec::free(2).unwrap();
    let (m, p) = (g.reduce(a.iter().copied()).unwrap(), g.reduce(b.iter().copied()).unwrap());
    let (m, p) = (m.prefix(m.len().min(12)), p.prefix(p.len().min(12)));
    (m.len() == 12 && p.len() == 12 && m != p).then_some((g, m, p))
}

proptest! {
    #[test]
    fn membership_is_zero_gromov_product(a in raw_ray(), b in raw_ray()) {
        let Some((g, m, p)) = rays(&a, &b) else { return Ok(()) };
        let s = strip_tree(&g, &m, &p).unwrap();
        let window = s.window(4).unwrap();
        prop_assert_eq!(window.len(), s.card_in_ball(4));
        for x in g.ball(4, CAP).unwrap() {
            prop_assert_eq!(s.contains(&x).unwrap(), window.contains(&x));
        }
        if s.confluence() <= 4 {
            prop_assert!(s.contains(&s.confluence_point()).unwrap());
        }
    }

    #[test]
    fn strip_is_symmetric_and_translates(a in raw_ray(), b in raw_ray(), t in prop::collection::vec((0u16..2, prop::sample::select(vec![-1i64, 1])), 0..4)) {
        let Some((g, m, p)) = rays(&a, &b) else { return Ok(()) };
        let s = strip_tree(&g, &m, &p).unwrap();
        let r = strip_tree(&g, &p, &m).unwrap();
        prop_assert_eq!(s.window(6).unwrap(), r.window(6).unwrap());
        let h = g.reduce(t).unwrap();
        let moved = s.translate(&h).unwrap();
        for x in s.window(5).unwrap() {
            let y = g.multiply(&h, &x);
            if y.len() + 1 < 12 - h.len() {
                prop_assert!(moved.contains(&y).unwrap());
            }
        }
    }

    #[test]
    fn strips_separate_distinct_ends(a in raw_ray(), b in raw_ray()) {
        let Some((g, m, p)) = rays(&a, &b) else { return Ok(()) };
        let s = strip_tree(&g, &m, &p).unwrap();
        // Points deep along one end only sit on the strip through that end.
        let k = s.confluence() + 3;
        if k < 11 {
            prop_assert!(s.contains(&m.prefix(k)).unwrap());
            prop_assert!(s.contains(&p.prefix(k)).unwrap());
            for l in g.alphabet() {
                if l == m.letters()[k] {
                    continue;
                }
                let mut w = m.prefix(k).letters().to_vec();
                w.push(l);
                if let Ok(off) = g.element(w) {
                    prop_assert!(!s.contains(&off).unwrap());
                }
            }
        }
        let growth = strip_growth(&s, 11);
        if s.confluence() + 2 <= 11 {
            prop_assert!(growth.exponent.is_finite());
        }
    }

    #[test]
    fn relabeling_preserves_cards_and_distances(a in raw_ray(), b in raw_ray(), swap in any::<bool>(), inv in any::<bool>()) {
        let Some((g, m, p)) = rays(&a, &b) else { return Ok(()) };
        let perm: Vec<u16> = if swap { vec![1, 0] } else { vec![0, 1] };
        let invert = vec![inv, !inv];
        let (fm, fp) = (g.relabel(&m, &perm, &invert), g.relabel(&p, &perm, &invert));
        let s = strip_tree(&g, &m, &p).unwrap();
        let f = strip_tree(&g, &fm, &fp).unwrap();
        for k in 0..=10 {
            prop_assert_eq!(s.card_in_ball(k), f.card_in_ball(k));
        }
        for t in 0..=12 {
            let x = geodesic_ray_point(&m, t).unwrap();
            let y = geodesic_ray_point(&p, t).unwrap();
            let d = g.word_length(&g.multiply(&g.inverse(&x), &y));
            let fx = geodesic_ray_point(&fm, t).unwrap();
            let fy = geodesic_ray_point(&fp, t).unwrap();
            prop_assert_eq!(d, g.word_length(&g.multiply(&g.inverse(&fx), &fy)));
        }
    }
}

#[test]
fn strips_need_distinguishable_rays() {
    let g = GroupSpec::free(2).unwrap();
    let a = g.parse("a a b").unwrap();
    assert!(strip_tree(&g, &a, &a).is_err());
    let z = GroupSpec::free_product(vec![3, 3]).unwrap();
    assert!(strip_tree(&z, &Element::identity(), &Element::identity()).is_err());
}
