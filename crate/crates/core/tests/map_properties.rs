use neutral_orbits_core::map::{build_clm_map, build_clm_map_singular, build_thaler_map, IntervalMap};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference_maps() -> Vec<IntervalMap> {
    vec![
        build_thaler_map(0.5, &[0.5], None).unwrap(),
        build_thaler_map(0.5, &[0.4], None).unwrap(),
        build_thaler_map(1.0, &[0.5], None).unwrap(),
        build_thaler_map(0.3, &[0.3, 0.7], None).unwrap(),
        build_clm_map(2.5).unwrap(),
        build_clm_map_singular(4.0, 0.5, 0.5, 0.1).unwrap(),
    ]
}

#[test]
fn inverse_branches_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in reference_maps() {
        let (a, b) = m.domain;
        for (j, br) in m.branches.iter().enumerate() {
            for _ in 0..1000 {
                let y = rng.random_range(a..b);
                let x = br.inverse(y);
                assert!((br.eval(x) - y).abs() <= 1e-12, "{} branch {j} at y = {y}", m.describe());
            }
        }
    }
}

#[test]
fn branches_are_strictly_increasing() {
    for m in reference_maps() {
        for (j, br) in m.branches.iter().enumerate() {
            let n = 10_000;
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=n {
                let x = br.lo + (br.hi - br.lo) * i as f64 / n as f64;
                let x = x.min(br.hi);
                assert!(br.deriv(x) > 0.0, "{} branch {j}: f'({x}) <= 0", m.describe());
                let y = br.eval(x);
                assert!(y >= prev, "{} branch {j} decreases at {x}", m.describe());
                prev = y;
            }
        }
    }
}

#[test]
fn thaler_branches_are_anchored_to_the_unit_interval() {
    for m in reference_maps().into_iter().filter(|m| !m.spec.is_clm()) {
        for br in &m.branches {
            assert!(br.eval(br.lo).abs() <= 1e-12, "{}", m.describe());
            assert!((br.eval(br.hi) - 1.0).abs() <= 1e-12, "{}", m.describe());
        }
    }
}

proptest! {
    #[test]
    fn symmetric_map_commutes_with_reflection(x in 1e-6f64..0.499_999) {
        let m = build_thaler_map(0.5, &[0.5], None).unwrap();
        prop_assert!((m.apply(1.0 - x) + m.apply(x) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn generated_thaler_maps_round_trip(alpha in 0.2f64..=1.0, cut in 0.25f64..0.75, y in 0.0f64..1.0) {
        let m = build_thaler_map(alpha, &[cut], None).unwrap();
        for br in &m.branches {
            prop_assert!((br.eval(br.inverse(y)) - y).abs() <= 1e-12);
        }
    }
}
