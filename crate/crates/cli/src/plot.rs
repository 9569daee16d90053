//! Rendering of CSV tables to SVG.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use neutral_orbits_core::arcsine::lamperti_pdf;
use neutral_orbits_core::asymptotics::fit_loglog;

use crate::error::{CliError, Result};
use crate::svg::{Figure, Line};
use crate::table::Table;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    Histogram,
    Loglog,
    Line,
}

impl PlotKind {
    pub fn accepts(&self) -> &'static [&'static str] {
        match self {
            PlotKind::Histogram => &["occupation", "histogram"],
            PlotKind::Loglog => &["tails", "decay", "coverage"],
            PlotKind::Line => &["density", "correlation", "coverage", "decay"],
        }
    }
}

const OCCUPATION_BINS: usize = 50;

/// A slope with a typographic minus and two decimals.
pub fn slope_label(slope: f64) -> String {
    format!("{slope:.2}").replace('-', "\u{2212}")
}

fn mismatch(path: &Path, table: &Table, kind: PlotKind) -> CliError {
    CliError::Schema {
        path: path.to_path_buf(),
        reason: format!(
            "a {:?} plot needs one of {:?}, found `{}`",
            kind,
            kind.accepts(),
            table.schema
        ),
    }
}

/// Groups `(x, y)` pairs by a label column, keeping first-seen order.
fn grouped(labels: &[String], x: &[f64], y: &[f64]) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut order: Vec<String> = Vec::new();
    let mut map: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for ((l, &a), &b) in labels.iter().zip(x).zip(y) {
        if !map.contains_key(l) {
            order.push(l.clone());
        }
        map.entry(l.clone()).or_default().push((a, b));
    }
    order
        .into_iter()
        .map(|l| {
            let pts = map.remove(&l).unwrap_or_default();
            (l, pts)
        })
        .collect()
}

fn with_slope(label: &str, pts: &[(f64, f64)]) -> String {
    let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).cloned().unzip();
    match fit_loglog(&x, &y, None) {
        Ok(fit) => format!("{label}  slope {}", slope_label(fit.slope)),
        Err(_) => label.to_string(),
    }
}

pub fn figure(table: &Table, kind: PlotKind) -> Result<Option<Figure>> {
    if !kind.accepts().contains(&table.schema.as_str()) {
        return Ok(None);
    }
    let title = table.meta.get("title").cloned().unwrap_or_else(|| table.schema.clone());
    let mut fig = Figure {
        title,
        ..Default::default()
    };
    match (kind, table.schema.as_str()) {
        (PlotKind::Histogram, "occupation") => {
            let s = table.floats("s1")?;
            let mut counts = vec![0usize; OCCUPATION_BINS];
            for v in &s {
                let i = ((v * OCCUPATION_BINS as f64) as usize).min(OCCUPATION_BINS - 1);
                counts[i] += 1;
            }
            let w = 1.0 / OCCUPATION_BINS as f64;
            fig.bars = counts
                .iter()
                .enumerate()
                .map(|(i, &c)| (i as f64 * w, (i + 1) as f64 * w, c as f64 / (s.len() as f64 * w)))
                .collect();
            fig.x_label = "S_n^1 / n".into();
            fig.y_label = "density".into();
            let meta = |k: &str| table.meta.get(k).and_then(|v| v.parse::<f64>().ok());
            if let (Some(alpha), Some(p), Some(2.0)) = (meta("alpha"), meta("p"), meta("d")) {
                if alpha < 1.0 {
                    let pts = (1..400)
                        .map(|i| {
                            let t = i as f64 / 400.0;
                            (t, lamperti_pdf(alpha, p, t).unwrap_or(f64::NAN))
                        })
                        .collect();
                    fig.lines.push(Line {
                        label: format!("limit law (alpha={alpha}, p={p:.4})"),
                        points: pts,
                        dashed: false,
                    });
                }
            }
        }
        (PlotKind::Histogram, "histogram") => {
            let n = table.floats("n")?;
            let last = n.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lambda = table.strings("lambda")?;
            let first = lambda[0].clone();
            let (l, r, m) = (table.floats("left")?, table.floats("right")?, table.floats("mass")?);
            fig.bars = (0..n.len())
                .filter(|&i| n[i] == last && lambda[i] == first)
                .map(|i| (l[i], r[i], m[i] / (r[i] - l[i])))
                .collect();
            fig.x_label = "x".into();
            fig.y_label = "density".into();
            fig.log_y = true;
            fig.title = format!("{} (n = {last}, {first})", fig.title);
        }
        (PlotKind::Loglog, schema) => {
            let (x, y, labels) = match schema {
                "tails" => (table.floats("n")?, table.floats("value")?, table.strings("series")?),
                "decay" => {
                    let x = table.floats("n")?;
                    let labels = vec!["m_n".to_string(); x.len()];
                    (x, table.floats("mass")?, labels)
                }
                _ => {
                    let x = table.floats("n")?;
                    let labels = vec!["covering radius".to_string(); x.len()];
                    (x, table.floats("covering_radius")?, labels)
                }
            };
            fig.log_x = true;
            fig.log_y = true;
            fig.x_label = "n".into();
            fig.y_label = table.meta.get("y").cloned().unwrap_or_else(|| "value".into());
            for (label, pts) in grouped(&labels, &x, &y) {
                fig.lines.push(Line {
                    label: with_slope(&label, &pts),
                    points: pts,
                    dashed: false,
                });
            }
        }
        (PlotKind::Line, schema) => {
            let (xs, ys, labels, xl, yl) = match schema {
                "density" => {
                    let x = table.floats("x")?;
                    let labels = table.strings("piece")?;
                    (x, table.floats("h")?, labels, "x", "h")
                }
                "correlation" => {
                    let x = table.floats("n")?;
                    let labels = vec!["estimate".to_string(); x.len()];
                    (x, table.floats("estimate")?, labels, "n", "correlation")
                }
                "decay" => {
                    let x = table.floats("n")?;
                    let labels = vec!["m_n".to_string(); x.len()];
                    (x, table.floats("mass")?, labels, "n", "mass on Y")
                }
                _ => {
                    let x = table.floats("n")?;
                    let labels = vec!["covering radius".to_string(); x.len()];
                    (x, table.floats("covering_radius")?, labels, "n", "radius")
                }
            };
            fig.x_label = xl.into();
            fig.y_label = yl.into();
            fig.log_x = schema != "density";
            for (label, pts) in grouped(&labels, &xs, &ys) {
                fig.lines.push(Line {
                    label,
                    points: pts,
                    dashed: false,
                });
            }
            if schema == "correlation" {
                let limit = table.floats("limit")?;
                fig.lines.push(Line {
                    label: "limit".into(),
                    points: xs.iter().cloned().zip(limit).collect(),
                    dashed: true,
                });
            }
        }
        _ => return Ok(None),
    }
    Ok(Some(fig))
}

/// Renders `csv` as `kind`, writing next to it unless `out` is given.
pub fn plot(csv: &Path, kind: PlotKind, out: Option<&Path>) -> Result<PathBuf> {
    let table = Table::read(csv)?;
    let fig = figure(&table, kind)?.ok_or_else(|| mismatch(csv, &table, kind))?;
    let target = match out {
        Some(p) => p.to_path_buf(),
        None => csv.with_extension("svg"),
    };
    fs::write(&target, fig.render()).map_err(|e| CliError::io(&target, e))?;
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_label_uses_a_true_minus() {
        assert_eq!(slope_label(-1.4999), "\u{2212}1.50");
        assert_eq!(slope_label(0.25), "0.25");
    }

    #[test]
    fn tails_plot_reports_the_fitted_slope() {
        let mut t = Table::new("tails", &["series", "n", "value"]);
        for n in [100.0f64, 1000.0, 10000.0] {
            t.push(["X0+".to_string(), n.to_string(), (0.3 * n.powf(-1.5)).to_string()]);
        }
        let fig = figure(&t, PlotKind::Loglog).unwrap().unwrap();
        assert!(fig.render().contains("slope \u{2212}1.50"));
    }

    #[test]
    fn wrong_kind_is_a_mismatch() {
        let t = Table::new("series", &["name"]);
        assert!(figure(&t, PlotKind::Histogram).unwrap().is_none());
    }
}
