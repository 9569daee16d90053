//! Pinned configurations behind the acceptance suite.

use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

/// Acceptance criteria and the presets that check them. Criterion 11 is also
/// covered by the unit and property suites of every crate.
pub const CRITERIA: &[(u8, &[&str])] = &[
    (1, &["lamperti-reduction"]),
    (2, &["stable-laplace"]),
    (3, &["simplex-mean"]),
    (4, &["thmB-d2-alpha-half"]),
    (5, &["weights-asymmetric", "weights-symmetric"]),
    (6, &["thmC-symmetric"]),
    (7, &["cell-tail-asymptotics"]),
    (8, &["decay-alpha-half", "decay-alpha-one"]),
    (9, &["thmA-d2", "thmA-d3"]),
    (10, &["appendix-series"]),
    (11, &["determinism-occupation"]),
];

/// Presets that take hours on a desktop; the acceptance run skips them.
pub const LONG_RUNNING: &[&str] = &["thmA-d3"];

pub fn names() -> Vec<&'static str> {
    CRITERIA.iter().flat_map(|(_, v)| v.iter().copied()).collect()
}

fn thaler(alpha: f64, cuts: &[f64]) -> Value {
    json!({"family": "thaler", "alpha": alpha, "cuts": cuts})
}

fn body(name: &str) -> Option<Value> {
    let symmetric = thaler(0.5, &[0.5]);
    let asymmetric = thaler(0.5, &[0.4]);
    let beta = json!({"kind": "beta", "a": 2.0, "b": 5.0});
    Some(match name {
        "lamperti-reduction" => json!({
            "experiment": {"kind": "arcsine", "test": "lamperti"},
        }),
        "stable-laplace" => json!({
            "seed": 7,
            "experiment": {
                "kind": "arcsine", "test": "laplace",
                "cases": [[1.0 / 3.0, 1.0], [0.5, 1.0], [0.7, 0.5]],
                "t": [0.1, 1.0, 10.0],
                "samples": 1_000_000, "z": 4.0,
            },
        }),
        "simplex-mean" => json!({
            "seed": 7,
            "experiment": {
                "kind": "arcsine", "test": "simplex-mean",
                "alpha": 0.5, "weights": [[0.3, 0.7], [0.2, 0.3, 0.5]],
                "samples": 1_000_000, "z": 3.0,
            },
        }),
        "thmB-d2-alpha-half" => json!({
            "map": symmetric,
            "seed": 7,
            "experiment": {
                "kind": "occupation", "orbits": 10_000, "n": 1_000_000, "eps": 0.05, "eps_alt": 0.025,
                "lambda": {"kind": "uniform"}, "compare_lambda": beta,
                "stepping": "skip", "depth": 100_000,
                "ks_max": 0.05, "ks_two_max": 0.03,
            },
        }),
        "weights-asymmetric" => json!({
            "map": asymmetric,
            "seed": 7,
            "experiment": {
                "kind": "weights", "depth": 1_000_000,
                "ensemble": {"orbits": 10_000, "n": 1_000_000, "eps": 0.05, "stepping": "skip"},
                "pairwise_tol": 0.10,
            },
        }),
        "weights-symmetric" => json!({
            "map": symmetric,
            "seed": 7,
            "experiment": {
                "kind": "weights", "depth": 1_000_000,
                "ensemble": {"orbits": 10_000, "n": 1_000_000, "eps": 0.05, "stepping": "skip"},
                "pairwise_tol": 0.10,
                "expected": [0.5, 0.5], "expected_tol": 0.02,
            },
        }),
        "thmC-symmetric" => json!({
            "map": symmetric,
            "seed": 7,
            "experiment": {
                "kind": "pushforward", "orbits": 1_000_000, "n_list": [100, 1_000, 10_000], "eps": 0.05, "eps_alt": 0.025,
                "lambda": {"kind": "uniform"}, "compare_lambda": beta,
                "stepping": "skip", "depth": 100_000,
                "target": [0.5, 0.5], "mass_tol": 0.05, "lambda_tol": 0.05,
            },
        }),
        "cell-tail-asymptotics" => json!({
            "map": asymmetric,
            "experiment": {
                "kind": "cells", "depth": 20_000, "window": [100, 10_000],
                "slope_tol": 0.05, "prefactor_tol": 0.10,
            },
        }),
        "decay-alpha-half" => json!({
            "map": symmetric,
            "seed": 7,
            "experiment": {
                "kind": "decay", "orbits": 1_000_000,
                "n_list": geometric(100, 10_000),
                "window": [100, 10_000],
                "stepping": "skip", "depth": 100_000, "exponent_tol": 0.07,
            },
        }),
        "decay-alpha-one" => json!({
            "map": thaler(1.0, &[0.5]),
            "seed": 7,
            "experiment": {
                "kind": "decay", "orbits": 20_000,
                "n_list": geometric(1_000, 100_000),
                "window": [1_000, 100_000],
                "stepping": "skip", "depth": 1_000_000, "log_spread_max": 0.25,
            },
        }),
        "thmA-d2" => json!({
            "map": symmetric,
            "seed": 7,
            "experiment": {"kind": "coverage", "n_max": 10_000_000, "delta": 0.1, "eps": 0.05, "radius_max": 0.1},
        }),
        "thmA-d3" => json!({
            "map": thaler(0.5, &[1.0 / 3.0, 2.0 / 3.0]),
            "seed": 7,
            "experiment": {"kind": "coverage", "n_max": 100_000_000, "delta": 0.1, "eps": 0.05, "radius_max": 0.25},
        }),
        "appendix-series" => json!({
            "experiment": {
                "kind": "series", "alphas": [0.3, 0.5, 0.7], "n": 1_000_000, "tol": 0.01,
                "log_two": {"n": 100_000_000, "tol": 0.05},
                "recursion": true,
            },
        }),
        "determinism-occupation" => json!({
            "map": symmetric,
            "seed": 7,
            "experiment": {
                "kind": "occupation", "orbits": 10_000, "n": 1_000_000, "eps": 0.05,
                "stepping": "skip", "depth": 100_000, "p_bar": [0.5, 0.5],
            },
        }),
        _ => return None,
    })
}

/// Ten points per decade between `lo` and `hi`, rounded to integers.
fn geometric(lo: u64, hi: u64) -> Vec<u64> {
    let decades = (hi as f64 / lo as f64).log10();
    let steps = (10.0 * decades).round() as u64;
    let mut out: Vec<u64> = (0..=steps)
        .map(|i| (lo as f64 * 10f64.powf(i as f64 / 10.0)).round() as u64)
        .collect();
    out.dedup();
    out
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let mut v = body(name).ok_or_else(|| CliError::UnknownPreset(name.to_string()))?;
    v["name"] = json!(name);
    v["output_dir"] = json!(format!("out/{name}"));
    Ok(serde_json::from_value(v)?)
}
