//! Batch driver: experiment configs in, CSV tables, JSON reports and SVG plots out.

pub mod config;
pub mod error;
pub mod experiments;
pub mod plot;
pub mod presets;
pub mod report;
pub mod svg;
pub mod table;

use std::fs;
use std::path::Path;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use report::Report;

/// Runs one experiment and writes its artifacts and `report.json` to the output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let spec = cfg.resolve()?;
    let map = spec.as_ref().map(|s| s.build()).transpose()?;
    let identity = cfg.identity(spec.as_ref());
    let config_hash = report::hash_json(&identity)?;
    let map_hash = spec.as_ref().map(report::hash_json).transpose()?;

    let exec = || experiments::execute(&cfg.experiment, map.as_ref(), cfg.seed);
    let out = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?
            .install(exec)?,
        None => exec()?,
    };

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut artifacts = Vec::new();
    for a in &out.artifacts {
        let path = dir.join(&a.file);
        a.table.write(&path)?;
        artifacts.push(a.file.clone());
        if let (true, Some(kind)) = (cfg.plots, a.plot) {
            let svg = plot::plot(&path, kind, None)?;
            if let Some(name) = svg.file_name() {
                artifacts.push(name.to_string_lossy().into_owned());
            }
        }
    }
    let pass = out.checks.iter().all(|c| c.pass);
    let report = Report {
        name: cfg.name.clone(),
        experiment: cfg.experiment.tag().to_string(),
        map: map.as_ref().map(|m| m.describe()),
        map_hash,
        config_hash,
        seed: cfg.seed,
        config: serde_json::to_value(&identity)?,
        statistics: out.statistics,
        checks: out.checks,
        pass,
        artifacts,
    };
    let path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}

/// Reads a config file and runs it.
pub fn run_path(path: &Path) -> Result<Report> {
    run(&ExperimentConfig::from_path(path)?)
}
