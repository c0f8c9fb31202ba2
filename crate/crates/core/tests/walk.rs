use poisson_walks::mc::stream_rng;
use poisson_walks::walk::{
    entropy_rows, estimate_drift, sample_bilateral, sample_path, shift_t, shift_u, BilateralSample, PowerTable,
};
use poisson_walks::{GroupSpec, McConfig, Measure};
use proptest::prelude::*;

fn cases() -> Vec<(GroupSpec, Measure)> {
    let f2 = GroupSpec::free(2).unwrap();
    let z = GroupSpec::free_product(vec![2, 3]).unwrap();
    let lit = Measure::from_pairs(
        [("a", 0.3), ("b a", 0.3), ("b^-1", 0.2), ("a^-1 b^-1 a", 0.2)]
            .iter()
            .map(|(w, p)| (f2.parse(w).unwrap(), *p)),
    )
    .unwrap();
    vec![
        (f2.clone(), Measure::simple_random_walk(&f2)),
        (f2, lit),
        (z.clone(), Measure::simple_random_walk(&z)),
    ]
}

#[test]
fn entropy_rate_is_nonincreasing() {
    for (g, mu) in cases() {
        let table = PowerTable::build(&g, &mu, 8, 2_000_000).unwrap();
        let rows = entropy_rows(&table);
        for w in rows.windows(2) {
            let (a, b) = (w[0].entropy / w[0].n as f64, w[1].entropy / w[1].n as f64);
            assert!(b <= a + 1e-9, "{:?}: H/n rose from {a} to {b}", g.kind());
        }
    }
}

#[test]
fn drift_of_srw_on_z2_free_product_cube() {
    let g = GroupSpec::free_product(vec![2, 2, 2]).unwrap();
    let mu = Measure::simple_random_walk(&g);
    let r = estimate_drift(&g, &mu, 5_000, 100, &McConfig::new(3));
    assert!((r.estimate - 1.0 / 3.0).abs() < 0.01, "{}", r.estimate);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sampled_paths_are_consistent(seed in any::<u64>(), n in 1usize..60, which in 0usize..3) {
        let (g, mu) = cases().swap_remove(which);
        let path = sample_path(&g, &mu, n, &mut stream_rng(seed, 0));
        prop_assert!(path.is_consistent(&g));
        for (i, h) in path.increments().iter().enumerate() {
            prop_assert_eq!(&g.multiply(&path.elements()[i], h), &path.elements()[i + 1]);
        }
        // |x_n| <= n max |h|
        let max_len = mu.atoms().iter().map(|(h, _)| g.word_length(h)).max().unwrap();
        for (i, x) in path.elements().iter().enumerate() {
            prop_assert!(g.word_length(x) <= i * max_len);
        }
        // (Tx)_i = x_1 (Ux)_i
        let t = shift_t(&path).unwrap();
        let u = shift_u(&g, &path).unwrap();
        let x1 = &path.elements()[1];
        prop_assert_eq!(t.len(), u.elements().len());
        for (ti, ui) in t.iter().zip(u.elements()) {
            prop_assert_eq!(ti, &g.multiply(x1, ui));
        }
    }

    #[test]
    fn bilateral_split_and_merge_round_trips(seed in any::<u64>(), m in 1usize..30, n in 1usize..30, which in 0usize..3) {
        let (g, mu) = cases().swap_remove(which);
        let b = sample_bilateral(&g, &mu, m, n, &mut stream_rng(seed, 0), &mut stream_rng(seed, 1));
        let merged = BilateralSample::merge(&g, &b.forward(), &b.backward(&g));
        prop_assert_eq!(&merged, &b);
        for t in b.lo() + 1..=b.hi() {
            let step = g.multiply(b.at(t - 1).unwrap(), b.increment(t).unwrap());
            prop_assert_eq!(&step, b.at(t).unwrap());
        }
    }
}
