use neutral_orbits_core::density::{
    induced_density, natural_weights_formula, natural_weights_tailfit, refinement_error, DensityConfig,
};
use neutral_orbits_core::induced::CellTable;
use neutral_orbits_core::map::{build_clm_map, build_thaler_map, IntervalMap};

fn maps() -> Vec<IntervalMap> {
    vec![
        build_thaler_map(0.5, &[0.4], None).unwrap(),
        build_thaler_map(0.5, &[0.3, 0.7], None).unwrap(),
        build_clm_map(2.0).unwrap(),
    ]
}

#[test]
fn grid_refinement_moves_density_and_weights_little() {
    for m in maps() {
        let cells = CellTable::build(&m, 10_000).unwrap();
        let coarse = induced_density(&m, &cells, &DensityConfig::default()).unwrap();
        let fine_cfg = DensityConfig {
            grid_size: 2048,
            ..DensityConfig::default()
        };
        let fine = induced_density(&m, &cells, &fine_cfg).unwrap();
        let err = refinement_error(&coarse, &fine);
        assert!(err < 1e-4, "{}: refinement {err:e}", m.describe());

        let a = natural_weights_formula(&m, &cells, &coarse).unwrap();
        let b = natural_weights_formula(&m, &cells, &fine).unwrap();
        assert!(a.p_bar.linf(&b.p_bar) < 0.005, "{}", m.describe());
    }
}

#[test]
fn density_is_normalized_positive_and_log_lipschitz() {
    for m in maps() {
        let cells = CellTable::build(&m, 10_000).unwrap();
        let h = induced_density(&m, &cells, &DensityConfig::default()).unwrap();
        assert!((h.total() - 1.0).abs() < 1e-10, "{}", m.describe());
        assert!(h.pieces.iter().flat_map(|p| &p.values).all(|&v| v > 0.0));
        assert!(h.log_lipschitz.is_finite(), "{}", m.describe());
        assert!(h.residual < 1e-6, "{}: residual {:e}", m.describe(), h.residual);
    }
}

#[test]
fn weights_do_not_depend_on_the_scale_of_h() {
    for m in maps() {
        let cells = CellTable::build(&m, 10_000).unwrap();
        let h = induced_density(&m, &cells, &DensityConfig::default()).unwrap();
        let mut doubled = h.clone();
        for p in &mut doubled.pieces {
            for v in &mut p.values {
                *v *= 2.0;
            }
        }
        let a = natural_weights_formula(&m, &cells, &h).unwrap();
        let b = natural_weights_formula(&m, &cells, &doubled).unwrap();
        assert_eq!(a.p_bar, b.p_bar, "{}", m.describe());
    }
}

#[test]
fn formula_and_tail_fit_agree() {
    let m = build_thaler_map(0.5, &[0.4], None).unwrap();
    let cells = CellTable::build(&m, 100_000).unwrap();
    let h = induced_density(&m, &cells, &DensityConfig::default()).unwrap();
    let a = natural_weights_formula(&m, &cells, &h).unwrap();
    let b = natural_weights_tailfit(&m, &cells, &h).unwrap();
    for (x, y) in a.constants.iter().zip(&b.constants) {
        assert!((x / y - 1.0).abs() < 0.02, "{x} vs {y}");
    }
}
