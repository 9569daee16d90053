use neutral_orbits_core::induced::{distortion_check, return_orbit, CellTable};
use neutral_orbits_core::map::{build_clm_map, build_thaler_map, IntervalMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn maps() -> Vec<IntervalMap> {
    vec![
        build_thaler_map(0.5, &[0.5], None).unwrap(),
        build_thaler_map(0.5, &[0.4], None).unwrap(),
        build_thaler_map(0.3, &[0.3, 0.7], None).unwrap(),
        build_clm_map(2.5).unwrap(),
    ]
}

#[test]
fn inducing_set_and_cells_partition_the_phase_interval() {
    for m in maps() {
        let cells = CellTable::build(&m, 10_000).unwrap();
        let n = cells.depth;
        let mut total = cells.inducing.measure();
        let mut tail = 0.0;
        for e in &cells.excursions {
            total += (1..=n).map(|k| e.dist[k] - e.dist[k + 1]).sum::<f64>();
            tail += e.dist[n + 1];
        }
        let gap = (m.length() - total).abs();
        assert!(gap <= 1e-8 + tail, "{}: gap {gap:e}, tail bound {tail:e}", m.describe());
    }
}

#[test]
fn cell_endpoints_map_to_the_next_cell() {
    for m in maps() {
        let cells = CellTable::build(&m, 2_000).unwrap();
        for e in &cells.excursions {
            for k in 1..=cells.depth {
                let image = m.apply(e.position(e.dist[k + 1]));
                assert!((image - e.position(e.dist[k])).abs() <= 1e-10, "{} depth {k}", m.describe());
            }
        }
    }
}

#[test]
fn located_cells_agree_with_iterated_return_times() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for m in maps() {
        let cells = CellTable::build(&m, 10_000).unwrap();
        let comps = &cells.inducing.components;
        let total = cells.inducing.measure();
        let mut checked = 0;
        for _ in 0..10_000 {
            let mut u = rng.random_range(0.0..total);
            let mut y = comps[0].0;
            for &(a, b) in comps {
                if u <= b - a {
                    y = a + u;
                    break;
                }
                u -= b - a;
            }
            let Some((_, depth)) = cells.locate_entry(y) else { continue };
            if depth > cells.depth {
                continue;
            }
            let r = return_orbit(&m, &cells.inducing, y, 10_000_000).unwrap();
            assert_eq!(r.tau, depth as u64 + 1, "{} at y = {y}", m.describe());
            checked += 1;
        }
        assert!(checked > 9_000, "{}", m.describe());
    }
}

#[test]
fn distortion_is_bounded_by_twice_the_fitted_constant() {
    for m in maps() {
        let cells = CellTable::build(&m, 5_000).unwrap();
        let r = distortion_check(&m, &cells, 10_000, 1_000, 17).unwrap();
        assert!(r.pass(), "{}: {r:?}", m.describe());
    }
}
