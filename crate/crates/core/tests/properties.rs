use htm_core::maxstable::*;
use htm_core::memory::*;
use htm_core::stable::char_bivariate;
use htm_core::{sample_sas, Kernel, StableParams};
use proptest::prelude::*;

#[test]
fn sampler_is_seed_deterministic() {
    let p = StableParams::new(1.2, 0.5).unwrap();
    let a = sample_sas(p, 1000, 8).unwrap();
    let b = sample_sas(p, 1000, 8).unwrap();
    let c = sample_sas(p, 1000, 9).unwrap();
    assert_eq!(a.values, b.values);
    assert_ne!(a.values, c.values);
}

#[test]
fn sampler_matches_characteristic_function() {
    // E cos(sX) = exp(-σ^α |s|^α)
    let (alpha, sigma) = (1.3, 0.7);
    let x = sample_sas(StableParams::new(alpha, sigma).unwrap(), 200_000, 21).unwrap().values;
    for s in [0.3, 1.0, 2.5] {
        let emp = x.iter().map(|v| (s * v).cos()).sum::<f64>() / x.len() as f64;
        let exact = (-(sigma * s).powf(alpha)).exp();
        // the std of cos(sX) is below 1/√2, so 5 standard errors is ~0.008
        assert!((emp - exact).abs() < 0.008, "s = {s}: {emp} vs {exact}");
    }
}

#[test]
fn bivariate_char_function_at_lag_zero_is_univariate() {
    let k = Kernel::exponential(1.0, 1.0).unwrap();
    let alpha = 1.4;
    let n = k.alpha_norm(alpha).value;
    // X(0) + X(0) has exponent 2^α ‖m‖^α
    let phi = char_bivariate(1.0, 1.0, 0.0, &k, alpha, 1e-10).unwrap();
    assert!((phi - (-(2f64.powf(alpha)) * n).exp()).abs() < 1e-9);
}

#[test]
fn excursion_covariance_is_scale_free_at_zero_level() {
    let k = Kernel::exponential(1.0, 1.0).unwrap();
    let mu = DiscreteMeasure::dirac(0.0);
    let cfg = ExcursionConfig::default();
    let a = excursion_cov_integrated(1.0, &k, 1.2, &mu, &cfg).unwrap();
    let b = excursion_cov_integrated(1.0, &k.scaled(37.0), 1.2, &mu, &cfg).unwrap();
    assert!((a.value - b.value).abs() < 1e-6, "{} vs {}", a.value, b.value);
}

#[test]
fn excursion_vanishes_beyond_compact_support() {
    let k = Kernel::indicator_unit();
    let mu = DiscreteMeasure::new(vec![(-0.5, 0.3), (0.7, 0.7)]).unwrap();
    let r = excursion_cov_integrated(3.0, &k, 1.0, &mu, &ExcursionConfig::default()).unwrap();
    assert_eq!(r.value, 0.0);
    let mc = mc_excursion_cov(3.0, &k, 1.0, 0.0, 0.0, 20_000, 4, &McConfig::default()).unwrap();
    assert!(mc.estimate.abs() < 4.0 * mc.std_err + 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn elementary_inequalities_hold(
        a in 0.0f64..50.0,
        b in 0.0f64..50.0,
        alpha in 0.01f64..1.99,
    ) {
        let r = elementary_inequalities(a, b, alpha).unwrap();
        prop_assert!(r.part_a && r.part_b && r.part_c, "{:?}", r);
    }

    #[test]
    fn overlap_integral_is_symmetric_and_homogeneous(
        a in 0.01f64..10.0,
        b in 0.01f64..10.0,
        alpha in 0.1f64..1.9,
        lambda in 0.1f64..10.0,
    ) {
        let ab = overlap_integral(a, b, alpha).unwrap();
        let ba = overlap_integral(b, a, alpha).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1e-300));
        let scaled = overlap_integral(lambda * a, lambda * b, alpha).unwrap();
        prop_assert!((scaled - lambda.powf(alpha) * ab).abs() <= 1e-10 * scaled.abs());
    }

    #[test]
    fn husler_reiss_inside_max_stable_bounds(
        lambda in 0.05f64..3.0,
        u in 0.2f64..5.0,
        v in 0.2f64..5.0,
    ) {
        let theta = 2.0 * htm_core::maxstable::norm_cdf(lambda);
        let (lo, hi) = joint_cdf_bounds(theta, 1.0, u, v).unwrap();
        let h = hr_joint_cdf(lambda, u, v).unwrap();
        prop_assert!(lo - 1e-12 <= h && h <= hi + 1e-12, "{lo} <= {h} <= {hi}");
    }

    #[test]
    fn classifier_ignores_kernel_scale(
        delta in 0.3f64..3.0,
        alpha in 0.2f64..1.95,
        lambda in 1e-3f64..1e3,
    ) {
        let k = Kernel::power_law(1.0, delta, 1.0, false).unwrap();
        let a = classify_memory(&k, alpha, false);
        let b = classify_memory(&k.scaled(lambda), alpha, false);
        prop_assert_eq!(a.verdict, b.verdict);
    }

    #[test]
    fn maxstable_verdict_ignores_frechet_index(c in 0.5f64..20.0, alpha in 0.2f64..8.0) {
        let dep = Dependence::BrownResnick { variogram: Variogram::Logarithmic { c } };
        let a = lrd_verdict_maxstable(&ExtremalModel::new(dep.clone(), 1.0).unwrap(), 1e4);
        let b = lrd_verdict_maxstable(&ExtremalModel::new(dep, alpha).unwrap(), 1e4);
        prop_assert_eq!(a.verdict, b.verdict);
        let expect = if c > 8.0 { Verdict::Srd } else { Verdict::Lrd };
        prop_assert_eq!(a.verdict, expect);
    }

    #[test]
    fn spectral_covariance_bounded_by_norm(t in 0.0f64..20.0, alpha in 0.2f64..1.95, delta in 1.1f64..3.0) {
        let k = Kernel::causal_series(0.7, delta.max(1.05 / alpha)).unwrap();
        let n = k.alpha_norm(alpha).value;
        let rho = k.spectral_covariance(alpha, t).unwrap();
        prop_assert!(rho >= 0.0 && rho <= n * (1.0 + 1e-9));
    }
}
