//! Experiment configuration documents.

use std::fs;
use std::path::{Path, PathBuf};

use neutral_orbits_core::density::DensityConfig;
use neutral_orbits_core::map::MapSpec;
use neutral_orbits_core::montecarlo::{InitialDensity, Observable, Stepping};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

/// One experiment run: map, experiment parameters, seed and output location.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSpec>,
    /// JSON file holding a map description; alternative to `map`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Size of the worker pool; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_true")]
    pub plots: bool,
    pub experiment: Experiment,
}

/// The part of a configuration that determines its results; hashed into reports.
#[derive(Clone, Debug, Serialize)]
pub struct Identity<'a> {
    pub name: &'a str,
    pub map: Option<&'a MapSpec>,
    pub seed: Option<u64>,
    pub experiment: &'a Experiment,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| CliError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = cfg;
        if let Some(rel) = &cfg.map_path {
            if rel.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.map_path = Some(dir.join(rel));
                }
            }
        }
        Ok(cfg)
    }

    /// Checks cross-field requirements and resolves the map description.
    pub fn resolve(&self) -> Result<Option<MapSpec>> {
        if self.workers == Some(0) {
            return Err(CliError::Config("`workers` must be positive".into()));
        }
        if self.experiment.is_stochastic() && self.seed.is_none() {
            return Err(CliError::MissingField("seed"));
        }
        let map = match (&self.map, &self.map_path) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("give either `map` or `map_path`, not both".into()))
            }
            (Some(m), None) => Some(m.clone()),
            (None, Some(p)) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Some(serde_json::from_str(&text).map_err(|source| CliError::Parse {
                    path: p.clone(),
                    source,
                })?)
            }
            (None, None) => None,
        };
        if self.experiment.needs_map() && map.is_none() {
            return Err(CliError::MissingField("map"));
        }
        Ok(map)
    }

    pub fn identity<'a>(&'a self, map: Option<&'a MapSpec>) -> Identity<'a> {
        Identity {
            name: &self.name,
            map,
            seed: self.seed,
            experiment: &self.experiment,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Validate(ValidateParams),
    Cells(CellsParams),
    Density(DensityParams),
    Weights(WeightsParams),
    Occupation(OccupationParams),
    Pushforward(PushforwardParams),
    Cesaro(CesaroParams),
    Correlation(CorrelationParams),
    Coverage(CoverageParams),
    Arcsine(ArcsineParams),
    Series(SeriesParams),
    Decay(DecayParams),
}

impl Experiment {
    pub fn tag(&self) -> &'static str {
        match self {
            Experiment::Validate(_) => "validate",
            Experiment::Cells(_) => "cells",
            Experiment::Density(_) => "density",
            Experiment::Weights(_) => "weights",
            Experiment::Occupation(_) => "occupation",
            Experiment::Pushforward(_) => "pushforward",
            Experiment::Cesaro(_) => "cesaro",
            Experiment::Correlation(_) => "correlation",
            Experiment::Coverage(_) => "coverage",
            Experiment::Arcsine(_) => "arcsine",
            Experiment::Series(_) => "series",
            Experiment::Decay(_) => "decay",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        match self {
            Experiment::Validate(_) | Experiment::Density(_) | Experiment::Series(_) => false,
            Experiment::Cells(p) => p.distortion_pairs > 0,
            Experiment::Weights(p) => p.ensemble.is_some(),
            Experiment::Arcsine(p) => !matches!(p, ArcsineParams::Lamperti { .. }),
            _ => true,
        }
    }

    pub fn needs_map(&self) -> bool {
        !matches!(self, Experiment::Arcsine(_) | Experiment::Series(_))
    }
}

fn uniform() -> InitialDensity {
    InitialDensity::Uniform
}

fn default_eps() -> f64 {
    0.05
}

fn default_cell_depth() -> usize {
    100_000
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateParams {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellsParams {
    pub depth: usize,
    pub window: (usize, usize),
    pub density: DensityConfig,
    pub slope_tol: f64,
    pub prefactor_tol: f64,
    /// Largest accepted `max / min` of `n^(1+alpha) mu(tau = n)` over the window.
    pub h4_spread_max: f64,
    /// Random pairs for the distortion diagnostic; 0 skips it.
    pub distortion_pairs: usize,
}

impl Default for CellsParams {
    fn default() -> Self {
        Self {
            depth: 20_000,
            window: (100, 10_000),
            density: DensityConfig::default(),
            slope_tol: 0.05,
            prefactor_tol: 0.10,
            h4_spread_max: 2.0,
            distortion_pairs: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityParams {
    pub depth: usize,
    pub density: DensityConfig,
    /// Also solve on the doubled grid and compare.
    pub refine: bool,
    pub refinement_max: f64,
    pub p_bar_shift_max: f64,
    pub normalization_tol: f64,
}

impl Default for DensityParams {
    fn default() -> Self {
        Self {
            depth: 10_000,
            density: DensityConfig::default(),
            refine: true,
            refinement_max: 1e-4,
            p_bar_shift_max: 0.005,
            normalization_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleParams {
    pub orbits: u64,
    pub n: u64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "uniform")]
    pub lambda: InitialDensity,
    #[serde(default)]
    pub stepping: Stepping,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsParams {
    /// Cell-table depth; the tail fit uses `[depth / 100, depth]`.
    pub depth: usize,
    pub density: DensityConfig,
    pub ensemble: Option<EnsembleParams>,
    /// Relative per-component agreement required between estimators.
    pub pairwise_tol: f64,
    /// Known weights (symmetric maps) and the absolute tolerance around them.
    pub expected: Option<Vec<f64>>,
    pub expected_tol: f64,
}

impl Default for WeightsParams {
    fn default() -> Self {
        Self {
            depth: 1_000_000,
            density: DensityConfig::default(),
            ensemble: None,
            pairwise_tol: 0.10,
            expected: None,
            expected_tol: 0.02,
        }
    }
}

fn default_ks_max() -> f64 {
    0.05
}

fn default_ks_two_max() -> f64 {
    0.03
}

fn default_concentration() -> (f64, f64) {
    (0.05, 0.9)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupationParams {
    pub orbits: u64,
    pub n: u64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Second neighbourhood radius, reported alongside `eps` but not checked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_alt: Option<f64>,
    #[serde(default = "uniform")]
    pub lambda: InitialDensity,
    /// Second initial density; its ensemble is compared with the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_lambda: Option<InitialDensity>,
    #[serde(default)]
    pub stepping: Stepping,
    #[serde(default = "default_cell_depth")]
    pub depth: usize,
    /// Weights of the limit law; computed from the invariant density when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_bar: Option<Vec<f64>>,
    #[serde(default = "default_ks_max")]
    pub ks_max: f64,
    #[serde(default = "default_ks_two_max")]
    pub ks_two_max: f64,
    /// For `alpha = 1`: `(radius, minimum share)` of samples near the weights.
    #[serde(default = "default_concentration")]
    pub concentration: (f64, f64),
}

fn default_mass_tol() -> f64 {
    0.05
}

fn default_trend_z() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PushforwardParams {
    pub orbits: u64,
    pub n_list: Vec<u64>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Second neighbourhood radius, reported alongside `eps` but not checked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_alt: Option<f64>,
    #[serde(default = "uniform")]
    pub lambda: InitialDensity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_lambda: Option<InitialDensity>,
    #[serde(default)]
    pub stepping: Stepping,
    #[serde(default = "default_cell_depth")]
    pub depth: usize,
    /// Limit masses of the neighbourhoods; the natural weights when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default = "default_mass_tol")]
    pub mass_tol: f64,
    #[serde(default = "default_mass_tol")]
    pub lambda_tol: f64,
    /// Standard errors allowed for a decrease between consecutive times.
    #[serde(default = "default_trend_z")]
    pub trend_z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CesaroParams {
    pub orbits: u64,
    pub n: u64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "uniform")]
    pub lambda: InitialDensity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default = "default_mass_tol")]
    pub mass_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationParams {
    pub psi: Observable,
    pub phi: Observable,
    pub n_list: Vec<u64>,
    pub orbits: u64,
    #[serde(default)]
    pub stepping: Stepping,
    #[serde(default = "default_cell_depth")]
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_bar: Option<Vec<f64>>,
    /// Accepted distance from the limit at the last time.
    #[serde(default = "default_mass_tol")]
    pub tol: f64,
}

fn default_delta() -> f64 {
    0.1
}

fn default_burn_in() -> u64 {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageParams {
    pub n_max: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: u64,
    /// Starting point; drawn uniformly from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default = "default_delta")]
    pub radius_max: f64,
}

fn default_samples() -> u64 {
    1_000_000
}

fn default_grid_t() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ArcsineParams {
    /// Closed-form reduction of the limit law at `alpha = 1/2`, `p = 1/2`.
    Lamperti {
        #[serde(default = "default_grid_t")]
        points: Vec<f64>,
        #[serde(default = "pdf_tol")]
        pdf_tol: f64,
        #[serde(default = "cdf_tol")]
        cdf_tol: f64,
    },
    /// Monte Carlo Laplace transform of the stable sampler.
    Laplace {
        /// `(alpha, p)` pairs.
        cases: Vec<(f64, f64)>,
        t: Vec<f64>,
        #[serde(default = "default_samples")]
        samples: u64,
        #[serde(default = "four")]
        z: f64,
    },
    /// Component means of the simplex-valued law.
    SimplexMean {
        #[serde(default = "half")]
        alpha: f64,
        weights: Vec<Vec<f64>>,
        #[serde(default = "default_samples")]
        samples: u64,
        #[serde(default = "three")]
        z: f64,
    },
}

fn pdf_tol() -> f64 {
    1e-12
}

fn cdf_tol() -> f64 {
    1e-8
}

fn four() -> f64 {
    4.0
}

fn three() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogTwoParams {
    pub n: u64,
    #[serde(default = "default_mass_tol")]
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesParams {
    pub alphas: Vec<f64>,
    pub n: u64,
    /// Lengths at which the partial sums must increase towards the limit.
    pub trend_n: Vec<u64>,
    pub tol: f64,
    pub log_two: Option<LogTwoParams>,
    /// Power-law fits of the recursion `x <- x + 4 x^3` from 0.3.
    pub recursion: bool,
}

impl Default for SeriesParams {
    fn default() -> Self {
        Self {
            alphas: vec![0.5],
            n: 1_000_000,
            trend_n: vec![1_000, 10_000, 100_000, 1_000_000],
            tol: 0.01,
            log_two: None,
            recursion: false,
        }
    }
}

fn exponent_tol() -> f64 {
    0.07
}

fn log_spread_max() -> f64 {
    0.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayParams {
    pub orbits: u64,
    pub n_list: Vec<u64>,
    pub window: (u64, u64),
    #[serde(default = "uniform")]
    pub lambda: InitialDensity,
    #[serde(default)]
    pub stepping: Stepping,
    #[serde(default = "default_cell_depth")]
    pub depth: usize,
    #[serde(default = "exponent_tol")]
    pub exponent_tol: f64,
    #[serde(default = "log_spread_max")]
    pub log_spread_max: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_seed_is_named() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"name":"x","map":{"family":"thaler","alpha":0.5,"cuts":[0.5]},
                "experiment":{"kind":"occupation","orbits":10,"n":100}}"#,
        )
        .unwrap();
        let err = cfg.resolve().unwrap_err();
        assert!(err.to_string().contains("seed"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r = serde_json::from_str::<ExperimentConfig>(
            r#"{"name":"x","experiment":{"kind":"series","bogus":1}}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn nested_tags_parse() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"name":"x","experiment":{"kind":"arcsine","test":"lamperti"}}"#,
        )
        .unwrap();
        assert!(!cfg.experiment.is_stochastic());
        assert!(cfg.resolve().unwrap().is_none());
    }
}
