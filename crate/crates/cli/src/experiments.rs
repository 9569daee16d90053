//! Experiment bodies: each turns parameters into statistics, checks and tables.

use std::f64::consts::PI;

use neutral_orbits_core::arcsine::{
    ks_two_sample, lamperti_cdf, lamperti_pdf, sample_stable, sample_z, SimplexPoint,
};
use neutral_orbits_core::asymptotics::{
    fit_power_law, geometric_indices, recursion_sequence, series_log_two, series_one, GFunction,
};
use neutral_orbits_core::density::{
    induced_density, natural_weights_formula, natural_weights_tailfit, refinement_error,
    return_mass_decay, tail_summary, DensityConfig, DensityGrid, NaturalWeights,
};
use neutral_orbits_core::induced::{
    cell_asymptotics, distortion_check, tail_statistics, CellTable,
};
use neutral_orbits_core::map::{validate_map, IntervalMap};
use neutral_orbits_core::montecarlo::{
    cesaro_pushforward, correlation, ensemble_starts, mean_se, occupation_ensemble, par_indexed,
    pushforward, simplex_coverage, trajectory_rng, CoverageConfig, Engine, EnsembleConfig,
    InitialDensity, MeasureSummary, OccupationEnsemble, Stepping,
};
use serde_json::{json, Value};

use crate::config::*;
use crate::error::{CliError, Result};
use crate::plot::PlotKind;
use crate::report::{num, Check};
use crate::table::Table;

/// Depth of the cell table behind default weights and tail constants.
const AUX_DEPTH: usize = 20_000;
/// Window for the tail constant used to predict decay prefactors.
const AUX_WINDOW: (usize, usize) = (100, 10_000);
/// Offset between the seeds of a primary and a comparison ensemble.
const COMPARE_SEED_OFFSET: u64 = 1;
/// Neighbourhood radius for engines whose neighbourhoods are unused.
const UNUSED_EPS: f64 = 1e-3;

pub struct Artifact {
    pub file: String,
    pub table: Table,
    pub plot: Option<PlotKind>,
}

pub struct Output {
    pub statistics: Value,
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
}

fn artifact(file: &str, table: Table, plot: Option<PlotKind>) -> Artifact {
    Artifact {
        file: file.to_string(),
        table,
        plot,
    }
}

pub fn execute(exp: &Experiment, map: Option<&IntervalMap>, seed: Option<u64>) -> Result<Output> {
    let map = || map.ok_or(CliError::MissingField("map"));
    let seed = || seed.ok_or(CliError::MissingField("seed"));
    match exp {
        Experiment::Validate(_) => validate(map()?),
        Experiment::Cells(p) => cells(map()?, p, seed().ok()),
        Experiment::Density(p) => density(map()?, p),
        Experiment::Weights(p) => weights(map()?, p, seed().ok()),
        Experiment::Occupation(p) => occupation(map()?, p, seed()?),
        Experiment::Pushforward(p) => pushforward_exp(map()?, p, seed()?),
        Experiment::Cesaro(p) => cesaro(map()?, p, seed()?),
        Experiment::Correlation(p) => correlation_exp(map()?, p, seed()?),
        Experiment::Coverage(p) => coverage(map()?, p, seed()?),
        Experiment::Arcsine(p) => arcsine(p, seed().ok()),
        Experiment::Series(p) => series(p),
        Experiment::Decay(p) => decay(map()?, p, seed()?),
    }
}

fn simplex(v: &[f64]) -> Result<SimplexPoint> {
    Ok(SimplexPoint::new(v.to_vec())?)
}

fn default_weights(map: &IntervalMap) -> Result<(CellTable, DensityGrid, NaturalWeights)> {
    let cells = CellTable::build(map, AUX_DEPTH)?;
    let h = induced_density(map, &cells, &DensityConfig::default())?;
    let w = natural_weights_formula(map, &cells, &h)?;
    Ok((cells, h, w))
}

fn weights_or(given: &Option<Vec<f64>>, map: &IntervalMap) -> Result<SimplexPoint> {
    match given {
        Some(v) => {
            if v.len() != map.d() {
                return Err(CliError::Config(format!(
                    "{} weights given for {} fixed points",
                    v.len(),
                    map.d()
                )));
            }
            simplex(v)
        }
        None => Ok(default_weights(map)?.2.p_bar),
    }
}

fn skip_cells(map: &IntervalMap, stepping: Stepping, depth: usize) -> Result<Option<CellTable>> {
    Ok(match stepping {
        Stepping::Skip => Some(CellTable::build(map, depth)?),
        Stepping::Direct => None,
    })
}

fn validate(map: &IntervalMap) -> Result<Output> {
    let rep = validate_map(map)?;
    let mut t = Table::new("checks", &["name", "pass", "detail"]);
    let mut checks = Vec::new();
    for c in &rep.checks {
        t.push([c.name.clone(), c.pass.to_string(), c.detail.clone()]);
        checks.push(Check::holds(c.name.clone(), c.pass, &c.detail));
    }
    Ok(Output {
        statistics: serde_json::to_value(&rep)?,
        checks,
        artifacts: vec![artifact("validate.csv", t, None)],
    })
}

fn cells(map: &IntervalMap, p: &CellsParams, seed: Option<u64>) -> Result<Output> {
    let alpha = map.alpha;
    let table = CellTable::build(map, p.depth)?;
    let fits = cell_asymptotics(&table, p.window)?;
    let mut checks = Vec::new();
    for f in &fits {
        let side = if f.side > 0.0 { "+" } else { "-" };
        let label = match f.branch {
            None => format!("neutral cell {}{side}", f.fixed_point),
            Some(j) => format!("entry cell {j}->{}{side}", f.fixed_point),
        };
        checks.push(Check::near(format!("{label} slope"), f.fit.slope, f.expected_slope, p.slope_tol));
        if f.branch.is_none() {
            checks.push(Check::relative(
                format!("{label} prefactor"),
                f.fit.prefactor,
                f.expected_prefactor,
                p.prefactor_tol,
            ));
        }
    }
    let leb = tail_statistics(map, &table, |a, b| (b - a).abs());
    let leb_fit = fit_power_law(|n| leb.tau_gt[n], p.window)?;
    checks.push(Check::near("Leb(tau > n) exponent", leb_fit.slope, -alpha, p.slope_tol));
    let h = induced_density(map, &table, &p.density)?;
    let tails = tail_summary(map, &table, &h, p.window)?;
    checks.push(Check::at_most(
        "spread of n^(1+alpha) mu(tau = n)",
        tails.h4_spread,
        p.h4_spread_max,
    ));
    let distortion = if p.distortion_pairs > 0 {
        let s = seed.ok_or(CliError::MissingField("seed"))?;
        let d = distortion_check(map, &table, p.distortion_pairs, p.window.1, s)?;
        checks.push(Check::holds(
            "distortion ratio on held-out pairs",
            d.pass(),
            "validation max <= 2 x calibration max",
        ));
        Some(d)
    } else {
        None
    };

    let ns = geometric_indices(p.window.0, p.window.1, 20);
    let mut t = Table::new("tails", &["series", "n", "value"])
        .meta("title", "cell lengths")
        .meta("y", "cell length");
    for e in &table.excursions {
        let side = if e.side > 0.0 { "+" } else { "-" };
        for &n in &ns {
            t.push([format!("X{}{side}", e.fixed_point), n.to_string(), num(e.dist[n] - e.dist[n + 1])]);
        }
    }
    for f in &table.families {
        let e = &table.excursions[f.excursion];
        let side = if e.side > 0.0 { "+" } else { "-" };
        for &n in &ns {
            let (a, b) = f.cell(n - 1);
            t.push([format!("Y{}->{}{side}", f.branch, e.fixed_point), n.to_string(), num(b - a)]);
        }
    }
    let mu = tail_statistics(map, &table, |a, b| h.integrate(a, b));
    let mut tt = Table::new("tails", &["series", "n", "value"]).meta("title", "return-time tails");
    for &n in &ns {
        tt.push(["Leb(tau>n)".to_string(), n.to_string(), num(leb.tau_gt[n])]);
    }
    for &n in &ns {
        tt.push(["mu(tau>n)".to_string(), n.to_string(), num(mu.tau_gt[n])]);
    }
    for &n in &ns {
        let eq: f64 = mu.eq.iter().map(|v| v[n]).sum();
        tt.push(["mu(tau=n)".to_string(), n.to_string(), num(eq)]);
    }
    Ok(Output {
        statistics: json!({
            "alpha": alpha,
            "depth": table.depth,
            "truncated_at": table.truncated_at,
            "cell_fits": fits,
            "leb_tau_fit": leb_fit,
            "mu_tau_fit": tails.tau_fit,
            "per_fixed_point_fits": tails.per_fixed_point,
            "h4_spread": tails.h4_spread,
            "h4_max": tails.h4_max,
            "c_tau": tails.c_tau,
            "distortion": distortion,
        }),
        checks,
        artifacts: vec![
            artifact("cells.csv", t, Some(PlotKind::Loglog)),
            artifact("tails.csv", tt, Some(PlotKind::Loglog)),
        ],
    })
}

fn weights_table(rows: &[(&str, &[f64], &[f64])]) -> Table {
    let mut t = Table::new("weights", &["method", "k", "constant", "p_bar"]);
    for (method, c, pb) in rows {
        for (k, (ck, pk)) in c.iter().zip(pb.iter()).enumerate() {
            t.push([method.to_string(), k.to_string(), num(*ck), num(*pk)]);
        }
    }
    t
}

fn density(map: &IntervalMap, p: &DensityParams) -> Result<Output> {
    let table = CellTable::build(map, p.depth)?;
    let h = induced_density(map, &table, &p.density)?;
    let w = natural_weights_formula(map, &table, &h)?;
    let mut checks = vec![
        Check::near("integral of h over Y", h.total(), 1.0, p.normalization_tol),
        Check::at_most("residual sup|Lh - h|", h.residual, p.density.tol),
        Check::at_most("tail-closure mass share", h.tail_mass, p.density.tail_limit),
    ];
    let mut refinement = Value::Null;
    if p.refine {
        let fine_cfg = DensityConfig {
            grid_size: 2 * p.density.grid_size,
            ..p.density.clone()
        };
        let fine = induced_density(map, &table, &fine_cfg)?;
        let wf = natural_weights_formula(map, &table, &fine)?;
        let err = refinement_error(&h, &fine);
        let shift = w.p_bar.linf(&wf.p_bar);
        checks.push(Check::at_most("sup difference under grid doubling", err, p.refinement_max));
        checks.push(Check::at_most("weight shift under grid doubling", shift, p.p_bar_shift_max));
        refinement = json!({"sup_difference": err, "p_bar_shift": shift, "fine_p_bar": wf.p_bar});
    }
    let mut t = Table::new("density", &["piece", "x", "h"]).meta("title", "invariant density of the return map");
    for (i, piece) in h.pieces.iter().enumerate() {
        for (x, v) in piece.nodes.iter().zip(&piece.values) {
            t.push([i.to_string(), num(*x), num(*v)]);
        }
    }
    let wt = weights_table(&[("formula", &w.constants, w.p_bar.as_slice())]);
    Ok(Output {
        statistics: json!({
            "residual": h.residual,
            "sweeps": h.sweeps,
            "tail_mass": h.tail_mass,
            "branch_depth": h.branch_depth,
            "log_lipschitz": h.log_lipschitz,
            "total": h.total(),
            "weights": w,
            "refinement": refinement,
        }),
        checks,
        artifacts: vec![
            artifact("density.csv", t, Some(PlotKind::Line)),
            artifact("weights.csv", wt, None),
        ],
    })
}

fn ensemble_config(e: &EnsembleParams, seed: u64) -> EnsembleConfig {
    EnsembleConfig {
        orbits: e.orbits,
        n: e.n,
        eps: e.eps,
        seed,
        lambda: e.lambda.clone(),
        stepping: e.stepping,
    }
}

fn weights(map: &IntervalMap, p: &WeightsParams, seed: Option<u64>) -> Result<Output> {
    let table = CellTable::build(map, p.depth)?;
    let h = induced_density(map, &table, &p.density)?;
    let formula = natural_weights_formula(map, &table, &h)?;
    let tail = natural_weights_tailfit(map, &table, &h)?;
    let mut est: Vec<(&str, Vec<f64>, Vec<f64>)> = vec![
        ("formula", formula.constants.clone(), formula.p_bar.as_slice().to_vec()),
        ("tailfit", tail.constants.clone(), tail.p_bar.as_slice().to_vec()),
    ];
    let mut ensemble = Value::Null;
    if let Some(e) = &p.ensemble {
        let s = seed.ok_or(CliError::MissingField("seed"))?;
        let cfg = ensemble_config(e, s);
        let cells = (e.stepping == Stepping::Skip).then_some(&table);
        let engine = Engine::new(map, cells, e.stepping, e.eps)?;
        let ens = occupation_ensemble(&engine, &cfg, None)?;
        let (means, ses) = ens.mean();
        let p_hat = SimplexPoint::normalized(&means)?;
        ensemble = json!({
            "means": means,
            "standard_errors": ses,
            "mean_leftover": ens.mean_leftover(),
            "flagged": ens.flagged,
        });
        est.push(("ensemble", means, p_hat.as_slice().to_vec()));
    }
    let mut checks = Vec::new();
    for i in 0..est.len() {
        for j in i + 1..est.len() {
            for k in 0..map.d() {
                checks.push(Check::relative(
                    format!("{} vs {} weight {k}", est[i].0, est[j].0),
                    est[i].2[k],
                    est[j].2[k],
                    p.pairwise_tol,
                ));
            }
        }
    }
    if let Some(x) = &p.expected {
        for (name, _, pb) in &est {
            for (k, (&v, &target)) in pb.iter().zip(x).enumerate() {
                checks.push(Check::near(format!("{name} weight {k}"), v, target, p.expected_tol));
            }
        }
    }
    let literal = formula.literal_constants.as_ref().map(|c| {
        let s: f64 = c.iter().sum();
        c.iter().map(|v| v / s).collect::<Vec<f64>>()
    });
    let rows: Vec<(&str, &[f64], &[f64])> = est.iter().map(|(n, c, pb)| (*n, c.as_slice(), pb.as_slice())).collect();
    Ok(Output {
        statistics: json!({
            "formula": formula,
            "tailfit": tail,
            "ensemble": ensemble,
            "literal_p_bar": literal,
            "density_residual": h.residual,
            "density_tail_mass": h.tail_mass,
        }),
        checks,
        artifacts: vec![artifact("weights.csv", weights_table(&rows), None)],
    })
}

fn occupation_table(ens: &OccupationEnsemble, alpha: f64, p: f64, d: usize) -> Table {
    let mut header: Vec<String> = vec!["index".into(), "x0".into()];
    header.extend((1..=d).map(|k| format!("s{k}")));
    header.extend(["leftover".to_string(), "flagged".to_string()]);
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new("occupation", &refs)
        .meta("alpha", alpha)
        .meta("p", num(p))
        .meta("d", d)
        .meta("n", ens.n)
        .meta("title", format!("occupation fractions, {}", ens.lambda));
    for s in &ens.samples {
        let mut row = vec![s.index.to_string(), num(s.x0)];
        row.extend(s.fractions.iter().map(|&v| num(v)));
        row.push(num(s.leftover));
        row.push(s.flagged.to_string());
        t.push(row);
    }
    t
}

fn occupation(map: &IntervalMap, p: &OccupationParams, seed: u64) -> Result<Output> {
    let alpha = map.alpha;
    let p_bar = weights_or(&p.p_bar, map)?;
    let cells = skip_cells(map, p.stepping, p.depth)?;
    let engine = Engine::new(map, cells.as_ref(), p.stepping, p.eps)?;
    let cfg = EnsembleConfig {
        orbits: p.orbits,
        n: p.n,
        eps: p.eps,
        seed,
        lambda: p.lambda.clone(),
        stepping: p.stepping,
    };
    let ens = occupation_ensemble(&engine, &cfg, None)?;
    let (means, ses) = ens.mean();
    let mut checks = Vec::new();
    let mut ks = None;
    let mut conc = None;
    if alpha < 1.0 {
        let v = ens.ks_lamperti(alpha, p_bar[0])?;
        checks.push(Check::at_most("KS of S_n^1/n against the limit law", v, p.ks_max));
        ks = Some(v);
    } else {
        let v = ens.concentration(&p_bar, p.concentration.0);
        checks.push(Check::at_least(
            format!("share of samples within {} of the weights", p.concentration.0),
            v,
            p.concentration.1,
        ));
        conc = Some(v);
    }
    let d = map.d();
    let mut artifacts = vec![artifact(
        "occupation.csv",
        occupation_table(&ens, alpha, p_bar[0], d),
        Some(PlotKind::Histogram),
    )];
    let mut compare = Value::Null;
    if let Some(l2) = &p.compare_lambda {
        let cfg2 = EnsembleConfig {
            lambda: l2.clone(),
            seed: seed.wrapping_add(COMPARE_SEED_OFFSET),
            ..cfg.clone()
        };
        let ens2 = occupation_ensemble(&engine, &cfg2, None)?;
        let ks2 = ks_two_sample(&ens.component(0), &ens2.component(0));
        checks.push(Check::at_most("two-sample KS between initial densities", ks2, p.ks_two_max));
        let (m2, s2) = ens2.mean();
        compare = json!({
            "lambda": ens2.lambda,
            "seed": cfg2.seed,
            "means": m2,
            "standard_errors": s2,
            "ks_two_sample": ks2,
            "flagged": ens2.flagged,
        });
        artifacts.push(artifact(
            "occupation_compare.csv",
            occupation_table(&ens2, alpha, p_bar[0], d),
            Some(PlotKind::Histogram),
        ));
    }
    let eps_alt = match p.eps_alt {
        Some(e2) => {
            let engine2 = Engine::new(map, cells.as_ref(), p.stepping, e2)?;
            let ens2 = occupation_ensemble(&engine2, &EnsembleConfig { eps: e2, ..cfg.clone() }, None)?;
            let (m2, s2) = ens2.mean();
            json!({
                "eps": e2,
                "means": m2,
                "standard_errors": s2,
                "mean_leftover": ens2.mean_leftover(),
                "ks_lamperti": if alpha < 1.0 { Some(ens2.ks_lamperti(alpha, p_bar[0])?) } else { None },
                "concentration": if alpha < 1.0 { None } else { Some(ens2.concentration(&p_bar, p.concentration.0)) },
            })
        }
        None => Value::Null,
    };
    Ok(Output {
        statistics: json!({
            "alpha": alpha,
            "p_bar": p_bar,
            "lambda": ens.lambda,
            "stepping": ens.stepping,
            "means": means,
            "standard_errors": ses,
            "mean_leftover": ens.mean_leftover(),
            "flagged": ens.flagged,
            "ks_lamperti": ks,
            "concentration": conc,
            "compare": compare,
            "eps_alt": eps_alt,
        }),
        checks,
        artifacts,
    })
}

fn summary_stats(s: &MeasureSummary) -> Value {
    json!({
        "ball_masses": s.ball_masses,
        "total_mass": s.total_mass(),
        "w1_to_reference": s.w1_to_reference,
        "w1_best_p": s.w1_best_p,
        "w1_best": s.w1_best,
        "samples": s.samples,
    })
}

fn pushforward_exp(map: &IntervalMap, p: &PushforwardParams, seed: u64) -> Result<Output> {
    let target = weights_or(&p.target, map)?;
    let cells = skip_cells(map, p.stepping, p.depth)?;
    let engine = Engine::new(map, cells.as_ref(), p.stepping, p.eps)?;
    let mut reports = vec![pushforward(&engine, &p.lambda, &p.n_list, p.orbits, seed, Some(&target), None)?];
    if let Some(l2) = &p.compare_lambda {
        let s2 = seed.wrapping_add(COMPARE_SEED_OFFSET);
        reports.push(pushforward(&engine, l2, &p.n_list, p.orbits, s2, Some(&target), None)?);
    }
    let rep = &reports[0];
    let last = rep.points.last().ok_or(CliError::MissingField("n_list"))?;
    let mut checks = Vec::new();
    for (k, (&m, &t)) in last.summary.ball_masses.iter().zip(target.as_slice()).enumerate() {
        checks.push(Check::near(format!("mass near fixed point {k} at n = {}", last.n), m, t, p.mass_tol));
    }
    if rep.points.len() > 1 {
        let mut worst = f64::INFINITY;
        for w in rep.points.windows(2) {
            for k in 0..map.d() {
                let se = w[0].ball_se[k].hypot(w[1].ball_se[k]);
                worst = worst.min((w[1].summary.ball_masses[k] - w[0].summary.ball_masses[k]) / se);
            }
        }
        checks.push(Check::at_least(
            "smallest standardized increase between consecutive times",
            worst,
            -p.trend_z,
        ));
        let first = &rep.points[0];
        let (m0, m1) = (first.summary.ball_masses.iter().sum::<f64>(), last.summary.ball_masses.iter().sum::<f64>());
        let se = {
            let v = |pt: &neutral_orbits_core::montecarlo::PushforwardPoint| {
                let s = pt.summary.ball_masses.iter().sum::<f64>();
                s * (1.0 - s) / p.orbits as f64
            };
            (v(first) + v(last)).sqrt()
        };
        checks.push(Check::at_least(
            "standardized gain of the total neighbourhood mass",
            (m1 - m0) / se,
            p.trend_z,
        ));
    }
    if let Some(other) = reports.get(1) {
        let b = other.points.last().ok_or(CliError::MissingField("n_list"))?;
        let diff = last
            .summary
            .ball_masses
            .iter()
            .zip(&b.summary.ball_masses)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        checks.push(Check::at_most("largest mass difference between initial densities", diff, p.lambda_tol));
    }
    let mut masses = Table::new("masses", &["lambda", "n", "k", "mass", "se", "y_mass", "w1_best"]);
    let mut hist = Table::new("histogram", &["lambda", "n", "left", "right", "mass"]).meta("title", "pushforward");
    let mut stats = Vec::new();
    for r in &reports {
        for pt in &r.points {
            for (k, (&m, &s)) in pt.summary.ball_masses.iter().zip(&pt.ball_se).enumerate() {
                masses.push([
                    r.lambda.clone(),
                    pt.n.to_string(),
                    k.to_string(),
                    num(m),
                    num(s),
                    num(pt.y_mass),
                    num(pt.summary.w1_best),
                ]);
            }
            for &(l, rr, m) in &pt.summary.bins {
                hist.push([r.lambda.clone(), pt.n.to_string(), num(l), num(rr), num(m)]);
            }
        }
        stats.push(json!({
            "lambda": r.lambda,
            "seed": r.seed,
            "flagged": r.flagged,
            "points": r.points.iter().map(|pt| json!({
                "n": pt.n,
                "summary": summary_stats(&pt.summary),
                "ball_se": pt.ball_se,
                "y_mass": pt.y_mass,
                "y_se": pt.y_se,
            })).collect::<Vec<_>>(),
        }));
    }
    let eps_alt = match p.eps_alt {
        Some(e2) => {
            let engine2 = Engine::new(map, cells.as_ref(), p.stepping, e2)?;
            let r2 = pushforward(&engine2, &p.lambda, &[last.n], p.orbits, seed, Some(&target), None)?;
            let pt = &r2.points[0];
            json!({"eps": e2, "n": pt.n, "ball_masses": pt.summary.ball_masses, "ball_se": pt.ball_se})
        }
        None => Value::Null,
    };
    Ok(Output {
        statistics: json!({"target": target, "stepping": rep.stepping, "ensembles": stats, "eps_alt": eps_alt}),
        checks,
        artifacts: vec![
            artifact("masses.csv", masses, None),
            artifact("histogram.csv", hist, Some(PlotKind::Histogram)),
        ],
    })
}

fn cesaro(map: &IntervalMap, p: &CesaroParams, seed: u64) -> Result<Output> {
    let target = weights_or(&p.target, map)?;
    let (summary, _) = cesaro_pushforward(map, &p.lambda, p.n, p.eps, p.orbits, seed, Some(&target), None)?;
    let checks = summary
        .ball_masses
        .iter()
        .zip(target.as_slice())
        .enumerate()
        .map(|(k, (&m, &t))| Check::near(format!("averaged mass near fixed point {k}"), m, t, p.mass_tol))
        .collect();
    let mut hist = Table::new("histogram", &["lambda", "n", "left", "right", "mass"]).meta("title", "Cesaro average");
    for &(l, r, m) in &summary.bins {
        hist.push([p.lambda.tag(), p.n.to_string(), num(l), num(r), num(m)]);
    }
    Ok(Output {
        statistics: json!({"target": target, "summary": summary_stats(&summary)}),
        checks,
        artifacts: vec![artifact("histogram.csv", hist, Some(PlotKind::Histogram))],
    })
}

fn correlation_exp(map: &IntervalMap, p: &CorrelationParams, seed: u64) -> Result<Output> {
    let p_bar = weights_or(&p.p_bar, map)?;
    let cells = skip_cells(map, p.stepping, p.depth)?;
    let engine = Engine::new(map, cells.as_ref(), p.stepping, UNUSED_EPS)?;
    let pts = correlation(&engine, &p.psi, &p.phi, &p.n_list, p.orbits, seed, &p_bar, None)?;
    let last = pts.last().ok_or(CliError::MissingField("n_list"))?;
    let checks = vec![Check::near(
        format!("correlation at n = {}", last.n),
        last.estimate,
        last.limit,
        p.tol,
    )];
    let mut t = Table::new("correlation", &["n", "estimate", "se", "limit"]).meta("title", "correlation");
    for c in &pts {
        t.push([c.n.to_string(), num(c.estimate), num(c.se), num(c.limit)]);
    }
    Ok(Output {
        statistics: json!({"p_bar": p_bar, "points": pts}),
        checks,
        artifacts: vec![artifact("correlation.csv", t, Some(PlotKind::Line))],
    })
}

fn coverage(map: &IntervalMap, p: &CoverageParams, seed: u64) -> Result<Output> {
    let x0 = match p.x0 {
        Some(x) => x,
        None => ensemble_starts(map, &InitialDensity::Uniform, 1, seed)?[0],
    };
    let cfg = CoverageConfig {
        n_max: p.n_max,
        delta: p.delta,
        eps: p.eps,
        burn_in: p.burn_in,
    };
    let rep = simplex_coverage(map, x0, &cfg)?;
    let checks = vec![
        Check::at_most("covering radius of the visited fractions", rep.covering_radius, p.radius_max),
        Check::holds("orbit not flagged", !rep.flagged, "no float stagnation"),
    ];
    let mut t = Table::new("coverage", &["n", "covering_radius"]).meta("title", "simplex coverage");
    for &(n, r) in &rep.history {
        t.push([n.to_string(), num(r)]);
    }
    Ok(Output {
        statistics: serde_json::to_value(&rep)?,
        checks,
        artifacts: vec![artifact("coverage.csv", t, Some(PlotKind::Line))],
    })
}

fn arcsine(p: &ArcsineParams, seed: Option<u64>) -> Result<Output> {
    let mut t = Table::new("arcsine", &["test", "case", "value", "target", "se"]);
    let mut checks = Vec::new();
    let mut stats = Vec::new();
    match p {
        ArcsineParams::Lamperti {
            points,
            pdf_tol,
            cdf_tol,
        } => {
            let (mut pdf_err, mut cdf_err) = (0.0f64, 0.0f64);
            for &x in points {
                let pdf = lamperti_pdf(0.5, 0.5, x)?;
                let cdf = lamperti_cdf(0.5, 0.5, x)?;
                let pdf_exact = 1.0 / (PI * (x * (1.0 - x)).sqrt());
                let cdf_exact = 2.0 / PI * x.sqrt().asin();
                pdf_err = pdf_err.max((pdf - pdf_exact).abs());
                cdf_err = cdf_err.max((cdf - cdf_exact).abs());
                t.push(["pdf".into(), num(x), num(pdf), num(pdf_exact), "0".into()]);
                t.push(["cdf".into(), num(x), num(cdf), num(cdf_exact), "0".into()]);
            }
            checks.push(Check::at_most("largest density error", pdf_err, *pdf_tol));
            checks.push(Check::at_most("largest distribution-function error", cdf_err, *cdf_tol));
            stats.push(json!({"pdf_error": pdf_err, "cdf_error": cdf_err}));
        }
        ArcsineParams::Laplace { cases, t: ts, samples, z } => {
            let seed = seed.ok_or(CliError::MissingField("seed"))?;
            for (ci, &(alpha, pk)) in cases.iter().enumerate() {
                let offset = ci as u64 * samples;
                let zeta = par_indexed(*samples, None, |i| {
                    sample_stable(alpha, pk, &mut trajectory_rng(seed, offset + i))
                })?;
                for &tt in ts {
                    let vals: Vec<f64> = zeta.iter().map(|&x| (-tt * x).exp()).collect();
                    let (m, se) = mean_se(&vals);
                    let exact = (-tt.powf(alpha) * pk).exp();
                    let score = (m - exact).abs() / se;
                    let case = format!("alpha={alpha} p={pk} t={tt}");
                    checks.push(Check::at_most(format!("Laplace transform, {case} (SE units)"), score, *z));
                    t.push(["laplace".into(), case, num(m), num(exact), num(se)]);
                    stats.push(json!({"alpha": alpha, "p": pk, "t": tt, "mean": m, "se": se, "exact": exact}));
                }
            }
        }
        ArcsineParams::SimplexMean {
            alpha,
            weights,
            samples,
            z,
        } => {
            let seed = seed.ok_or(CliError::MissingField("seed"))?;
            for (ci, w) in weights.iter().enumerate() {
                let pt = simplex(w)?;
                let offset = ci as u64 * samples;
                let draws = par_indexed(*samples, None, |i| {
                    sample_z(*alpha, &pt, &mut trajectory_rng(seed, offset + i))
                })?
                .into_iter()
                .collect::<std::result::Result<Vec<_>, _>>()?;
                for (k, &pk) in w.iter().enumerate() {
                    let comp: Vec<f64> = draws.iter().map(|d| d[k]).collect();
                    let (m, se) = mean_se(&comp);
                    let case = format!("p={w:?} k={k}");
                    checks.push(Check::at_most(
                        format!("mean of component {k} for p = {w:?} (SE units)"),
                        (m - pk).abs() / se,
                        *z,
                    ));
                    t.push(["simplex-mean".into(), case, num(m), num(pk), num(se)]);
                    stats.push(json!({"p": w, "k": k, "mean": m, "se": se}));
                }
            }
        }
    }
    Ok(Output {
        statistics: json!({ "results": stats }),
        checks,
        artifacts: vec![artifact("arcsine.csv", t, None)],
    })
}

fn series(p: &SeriesParams) -> Result<Output> {
    let mut t = Table::new("series", &["name", "alpha", "n", "value", "target"]);
    let mut checks = Vec::new();
    let mut stats = Vec::new();
    for &alpha in &p.alphas {
        let limit = PI / (alpha * PI).sin();
        let v = series_one(alpha, p.n)?;
        checks.push(Check::relative(format!("series_one(alpha={alpha}, n={})", p.n), v, limit, p.tol));
        t.push(["series_one".into(), num(alpha), p.n.to_string(), num(v), num(limit)]);
        let trend = p
            .trend_n
            .iter()
            .map(|&n| series_one(alpha, n))
            .collect::<std::result::Result<Vec<f64>, _>>()?;
        for (&n, &v) in p.trend_n.iter().zip(&trend) {
            t.push(["series_one".into(), num(alpha), n.to_string(), num(v), num(limit)]);
        }
        if trend.len() > 1 {
            let inc = trend.windows(2).all(|w| w[1] > w[0]);
            checks.push(Check::holds(
                format!("series_one(alpha={alpha}) increasing over {:?}", p.trend_n),
                inc,
                "strictly increasing",
            ));
        }
        stats.push(json!({"alpha": alpha, "n": p.n, "value": v, "limit": limit, "relative_error": v / limit - 1.0, "trend": trend}));
    }
    let mut log_two = Value::Null;
    if let Some(l) = &p.log_two {
        let v = series_log_two(&GFunction::One, &GFunction::One, l.n)?;
        checks.push(Check::near(format!("series_log_two(1, 1, n={})", l.n), v, 1.0, l.tol));
        t.push(["series_log_two".into(), "".into(), l.n.to_string(), num(v), "1".into()]);
        log_two = json!({"n": l.n, "value": v});
    }
    let mut recursion = Value::Null;
    if p.recursion {
        let (b, q, z0) = (4.0, 2.0, 0.3);
        let z = recursion_sequence(b, q, z0, 100_002)?;
        let fit = fit_power_law(|n| z[n], (1_000, 100_000))?;
        let gaps = fit_power_law(|n| z[n] - z[n + 1], (1_000, 100_000))?;
        let prefactor = (q * b).powf(-1.0 / q);
        checks.push(Check::near("recursion slope", fit.slope, -1.0 / q, 0.02));
        checks.push(Check::relative("recursion prefactor", fit.prefactor, prefactor, 0.05));
        checks.push(Check::near("recursion gap slope", gaps.slope, -(1.0 + 1.0 / q), 0.02));
        recursion = json!({"fit": fit, "gap_fit": gaps, "expected_prefactor": prefactor});
    }
    Ok(Output {
        statistics: json!({"series_one": stats, "series_log_two": log_two, "recursion": recursion}),
        checks,
        artifacts: vec![artifact("series.csv", t, None)],
    })
}

fn decay(map: &IntervalMap, p: &DecayParams, seed: u64) -> Result<Output> {
    let alpha = map.alpha;
    let cells = skip_cells(map, p.stepping, p.depth)?;
    let c_tau = {
        let aux;
        let table = match &cells {
            Some(c) if c.depth > AUX_WINDOW.1 => c,
            _ => {
                aux = CellTable::build(map, AUX_DEPTH)?;
                &aux
            }
        };
        let h = induced_density(map, table, &DensityConfig::default())?;
        tail_summary(map, table, &h, AUX_WINDOW)?.c_tau
    };
    let engine = Engine::new(map, cells.as_ref(), p.stepping, UNUSED_EPS)?;
    let rep = return_mass_decay(&engine, &p.lambda, &p.n_list, p.window, p.orbits, seed, Some(c_tau), None)?;
    let mut checks = Vec::new();
    if alpha < 1.0 {
        let fit = rep.fit.as_ref().ok_or_else(|| CliError::Config("no fit window points".into()))?;
        checks.push(Check::near("decay exponent of the mass on Y", fit.slope, alpha - 1.0, p.exponent_tol));
    } else {
        let spread = rep.log_spread.unwrap_or(f64::NAN);
        checks.push(Check::at_most("relative spread of m_n log n", spread, p.log_spread_max));
    }
    checks.push(Check::holds("m_n decreasing", rep.decreasing, "no increase beyond 3 SE"));
    let mut t = Table::new("decay", &["n", "mass", "se"])
        .meta("alpha", alpha)
        .meta("title", "mass on Y")
        .meta("y", "mass on Y");
    for ((n, m), s) in rep.n.iter().zip(&rep.mass).zip(&rep.se) {
        t.push([n.to_string(), num(*m), num(*s)]);
    }
    Ok(Output {
        statistics: json!({"report": rep, "c_tau": c_tau}),
        checks,
        artifacts: vec![artifact("decay.csv", t, Some(PlotKind::Loglog))],
    })
}
