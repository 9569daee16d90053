use std::f64::consts::PI;

use neutral_orbits_core::asymptotics::{blocked_sum, fit_loglog, fit_power_law, series_one, CompensatedSum};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn series_agrees_with_reversed_summation() {
    for alpha in [0.3, 0.5, 0.7] {
        let n = 200_000u64;
        let forward = series_one(alpha, n).unwrap();
        let nf = n as f64;
        let reversed: CompensatedSum = (1..n)
            .rev()
            .map(|j| (nf - j as f64).powf(alpha - 1.0) * (j as f64).powf(-alpha))
            .collect();
        let rel = (forward / reversed.value() - 1.0).abs();
        assert!(rel < 1e-10, "alpha {alpha}: {rel:e}");
        let mirrored = series_one(1.0 - alpha, n).unwrap();
        assert!((forward / mirrored - 1.0).abs() < 1e-10);
    }
}

#[test]
fn series_approaches_its_limit() {
    let limit = PI / (PI * 0.5f64).sin();
    let errs: Vec<f64> = [1_000u64, 10_000, 100_000]
        .iter()
        .map(|&n| (series_one(0.5, n).unwrap() - limit).abs())
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn blocked_sums_ignore_the_pool_size() {
    let term = |j: u64| 1.0 / (j as f64).powf(1.3);
    let run = |w| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .unwrap()
            .install(|| blocked_sum(1, 3_000_000, term))
    };
    assert_eq!(run(1).to_bits(), run(4).to_bits());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_power_laws_are_recovered(slope in -2.0f64..0.5, c in 0.01f64..100.0) {
        let fit = fit_power_law(|n| c * (n as f64).powf(slope), (100, 10_000)).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.prefactor / c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_percent_noise_moves_the_slope_little(slope in -2.0f64..0.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..=80).map(|i| 100.0 * 10f64.powf(i as f64 / 40.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| v.powf(slope) * (1.0 + 0.01 * rng.random_range(-1.0..1.0)))
            .collect();
        let fit = fit_loglog(&x, &y, None).unwrap();
        prop_assert!((fit.slope - slope).abs() < 0.01);
    }
}
