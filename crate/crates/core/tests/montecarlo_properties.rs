use neutral_orbits_core::arcsine::ks_two_sample;
use neutral_orbits_core::induced::CellTable;
use neutral_orbits_core::map::build_thaler_map;
use neutral_orbits_core::montecarlo::{
    occupation_ensemble, occupation_fractions, EnsembleConfig, Engine, InitialDensity, Stepping,
};
use proptest::prelude::*;

fn config(orbits: u64, n: u64, seed: u64, lambda: InitialDensity, stepping: Stepping) -> EnsembleConfig {
    EnsembleConfig {
        orbits,
        n,
        eps: 0.05,
        seed,
        lambda,
        stepping,
    }
}

#[test]
fn ensembles_do_not_depend_on_the_worker_count() {
    let m = build_thaler_map(0.5, &[0.3, 0.7], None).unwrap();
    let cells = CellTable::build(&m, 10_000).unwrap();
    for stepping in [Stepping::Direct, Stepping::Skip] {
        let engine = Engine::new(&m, Some(&cells), stepping, 0.05).unwrap();
        let cfg = config(300, 20_000, 11, InitialDensity::Uniform, stepping);
        let a = occupation_ensemble(&engine, &cfg, Some(1)).unwrap();
        let b = occupation_ensemble(&engine, &cfg, Some(3)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn time_outside_the_neighbourhoods_shrinks() {
    let m = build_thaler_map(0.5, &[0.5], None).unwrap();
    let cells = CellTable::build(&m, 100_000).unwrap();
    let engine = Engine::skip(&m, &cells, 0.05).unwrap();
    let left: Vec<f64> = [1_000, 10_000, 100_000]
        .iter()
        .map(|&n| {
            let cfg = config(2_000, n, 5, InitialDensity::Uniform, Stepping::Skip);
            occupation_ensemble(&engine, &cfg, None).unwrap().mean_leftover()
        })
        .collect();
    assert!(left.windows(2).all(|w| w[1] < w[0]), "{left:?}");
}

#[test]
fn occupation_law_ignores_the_initial_density() {
    let m = build_thaler_map(0.5, &[0.5], None).unwrap();
    let cells = CellTable::build(&m, 100_000).unwrap();
    let engine = Engine::skip(&m, &cells, 0.05).unwrap();
    let orbits = 2_000;
    let a = occupation_ensemble(&engine, &config(orbits, 100_000, 1, InitialDensity::Uniform, Stepping::Skip), None)
        .unwrap();
    let beta = InitialDensity::Beta { a: 2.0, b: 5.0 };
    let b = occupation_ensemble(&engine, &config(orbits, 100_000, 2, beta, Stepping::Skip), None).unwrap();
    let ks = ks_two_sample(&a.component(0), &b.component(0));
    assert!(ks <= 1.63 * (2.0 / orbits as f64).sqrt(), "KS {ks}");
}

#[test]
fn skip_stepping_matches_direct_iteration_in_law() {
    let m = build_thaler_map(0.5, &[0.4], None).unwrap();
    let cells = CellTable::build(&m, 100_000).unwrap();
    let orbits = 2_000;
    let run = |stepping, seed| {
        let engine = Engine::new(&m, Some(&cells), stepping, 0.05).unwrap();
        occupation_ensemble(&engine, &config(orbits, 10_000, seed, InitialDensity::Uniform, stepping), None).unwrap()
    };
    let a = run(Stepping::Direct, 3);
    let b = run(Stepping::Skip, 4);
    let ks = ks_two_sample(&a.component(0), &b.component(0));
    assert!(ks <= 1.63 * (2.0 / orbits as f64).sqrt(), "KS {ks}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fractions_lie_in_the_simplex(x0 in 0.0f64..=1.0, n in 1u64..5_000, eps in 0.01f64..0.2) {
        let m = build_thaler_map(0.5, &[0.3, 0.7], None).unwrap();
        let s = occupation_fractions(&m, x0, n, eps).unwrap();
        prop_assert!(s.fractions.iter().all(|&f| (0.0..=1.0).contains(&f)));
        let total: f64 = s.fractions.iter().sum::<f64>() + s.leftover;
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
