use poisson_walks::boundary::exact_harmonic_measure;
use poisson_walks::conditional::{
    doob_kernel, doob_kernel_from_function, path_density, sample_conditional, HarmonicFunction, MartinKernel, Mixture,
    Unit,
};
use poisson_walks::walk::sample_path;
use poisson_walks::{GroupSpec, McConfig, Measure};

fn cases() -> Vec<(GroupSpec, Measure)> {
    [GroupSpec::free(2).unwrap(), GroupSpec::free(3).unwrap(), GroupSpec::free_product(vec![3, 3, 3]).unwrap()]
        .into_iter()
        .map(|g| {
            let mu = Measure::simple_random_walk(&g);
            (g, mu)
        })
        .collect()
}

#[test]
fn doob_rows_sum_to_one_along_conditioned_paths() {
    for (g, mu) in cases() {
        let model = exact_harmonic_measure(&g, &mu).unwrap();
        let mc = McConfig::new(3);
        for i in 0..20 {
            let mut xi = model.sample_ray(mc.rng(i));
            let k = doob_kernel(&g, &mu, &model, &mut xi, 40).unwrap();
            let path = sample_conditional(&k, 25, &mut mc.rng(1000 + i)).unwrap();
            for x in path.elements() {
                let s: f64 = mu.atoms().iter().map(|(h, _)| k.prob(x, &g.multiply(x, h)).unwrap()).sum();
                assert!((s - 1.0).abs() <= 1e-10, "row sum {s}");
            }
        }
    }
}

#[test]
fn conditioned_density_telescopes() {
    for (g, mu) in cases() {
        let model = exact_harmonic_measure(&g, &mu).unwrap();
        let mc = McConfig::new(8);
        for i in 0..30 {
            let mut xi = model.sample_ray(mc.rng(i));
            let k = doob_kernel(&g, &mu, &model, &mut xi, 30).unwrap();
            let path = sample_path(&g, &mu, 10, &mut mc.rng(500 + i));
            let base: f64 = path.increments().iter().map(|h| mu.mass(h)).product();
            let f_end = k.function().value(path.last()).unwrap();
            let d = path_density(&k, &path).unwrap();
            assert!((d - base * f_end).abs() <= 1e-10 * d.max(1e-300), "{d} vs {}", base * f_end);
        }
    }
}

#[test]
fn unit_function_recovers_the_base_walk() {
    let (g, mu) = cases().remove(0);
    let k = doob_kernel_from_function(&g, &mu, Unit).unwrap();
    let mc = McConfig::new(1);
    let path = sample_path(&g, &mu, 12, &mut mc.rng(0));
    let base: f64 = path.increments().iter().map(|h| mu.mass(h)).product();
    assert!((path_density(&k, &path).unwrap() - base).abs() < 1e-15);
}

#[test]
fn doob_transform_is_affine_in_the_function() {
    for (g, mu) in cases() {
        let model = exact_harmonic_measure(&g, &mu).unwrap();
        let mc = McConfig::new(4);
        let mut r1 = model.sample_ray(mc.rng(0));
        let mut r2 = model.sample_ray(mc.rng(1));
        let f1 = MartinKernel::new(&model, &mut r1, 20).unwrap();
        let f2 = MartinKernel::new(&model, &mut r2, 20).unwrap();
        let w = 0.3;
        let mix = Mixture::new(vec![(w, Box::new(f1.clone())), (1.0 - w, Box::new(f2.clone()))]).unwrap();
        let k1 = doob_kernel_from_function(&g, &mu, f1.clone()).unwrap();
        let k2 = doob_kernel_from_function(&g, &mu, f2.clone()).unwrap();
        let km = doob_kernel_from_function(&g, &mu, mix).unwrap();
        for x in g.ball(3, 100_000).unwrap() {
            let (a, b) = (w * f1.value(&x).unwrap(), (1.0 - w) * f2.value(&x).unwrap());
            for (h, _) in mu.atoms() {
                let y = g.multiply(&x, h);
                let expect = (a * k1.prob(&x, &y).unwrap() + b * k2.prob(&x, &y).unwrap()) / (a + b);
                let got = km.prob(&x, &y).unwrap();
                assert!((got - expect).abs() <= 1e-12, "{got} vs {expect}");
            }
        }
    }
}

#[test]
fn non_harmonic_function_is_rejected() {
    struct Length;
    impl HarmonicFunction for Length {
        fn value(&self, x: &poisson_walks::Element) -> poisson_walks::Result<f64> {
            Ok(1.0 + x.len() as f64)
        }
    }
    let (g, mu) = cases().remove(0);
    assert!(doob_kernel_from_function(&g, &mu, Length).is_err());
}
