use serde::{Deserialize, Serialize};

use super::IntervalMap;
use crate::asymptotics::fit_loglog;
use crate::error::Result;
use crate::induced::InducingSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// A fitted one-sided local form `c |x - at|^e`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalForm {
    pub what: String,
    pub at: f64,
    pub side: f64,
    pub expected_exponent: f64,
    pub fitted_exponent: f64,
    pub expected_constant: f64,
    pub fitted_constant: f64,
}

impl LocalForm {
    fn ok(&self) -> bool {
        (self.fitted_exponent - self.expected_exponent).abs() <= 0.02
            && (self.fitted_constant / self.expected_constant - 1.0).abs() <= 0.02
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub map: String,
    pub checks: Vec<Check>,
    pub local_forms: Vec<LocalForm>,
    /// Smallest sampled `f'` at distance at least 0.01 from every fixed point.
    pub min_derivative_outside: f64,
    /// Smallest sampled derivative of the first-return map (two-branch family only).
    pub induced_min_derivative: Option<f64>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

const SAMPLES: usize = 10_000;

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Numerically checks the structural hypotheses on a map.
pub fn validate_map(map: &IntervalMap) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    let mut local_forms = Vec::new();
    let dom = map.domain;

    // Local power form and convexity at each fixed point.
    let mut convex_ok = true;
    for fp in &map.fixed_points {
        let br = &map.branches[fp.branch];
        for s in fp.sides(dom) {
            let mut ds = Vec::new();
            let mut disp = Vec::new();
            for delta in geometric(1e-6, 1e-3, 31) {
                let x = fp.position + s * delta;
                ds.push((x - fp.position).abs());
                disp.push(br.displacement(x).abs());
            }
            let fit = fit_loglog(&ds, &disp, None)?;
            local_forms.push(LocalForm {
                what: "fixed point".into(),
                at: fp.position,
                side: s,
                expected_exponent: 1.0 + fp.p,
                fitted_exponent: fit.slope,
                expected_constant: fp.b,
                fitted_constant: fit.prefactor,
            });
            for delta in geometric(1e-6, 1e-2, 21) {
                let f2 = br.second_deriv(fp.position + s * delta);
                if !(f2 * s > 0.0) {
                    convex_ok = false;
                }
            }
        }
    }

    // Critical behaviour at 0 for the two-branch family.
    if let Some(c) = &map.clm {
        let sides = [
            (1.0, c.k_plus, c.a_plus, -1.0),
            (-1.0, c.k_minus, c.a_minus, 1.0),
        ];
        for (s, k, a, image) in sides {
            let br = &map.branches[map.branch_index(if s > 0.0 { 0.0 } else { -1e-300 })];
            let lo = 1e-8f64.powf(1.0 / k);
            let hi = 1e-5f64.powf(1.0 / k);
            let xs = geometric(lo, hi, 31);
            let ys: Vec<f64> = xs
                .iter()
                .map(|&u| (br.eval(s * u) - image).abs())
                .collect();
            let fit = fit_loglog(&xs, &ys, None)?;
            local_forms.push(LocalForm {
                what: "critical point".into(),
                at: 0.0,
                side: s,
                expected_exponent: k,
                fitted_exponent: fit.slope,
                expected_constant: a,
                fitted_constant: fit.prefactor,
            });
        }
    }
    let bad: Vec<String> = local_forms
        .iter()
        .filter(|l| !l.ok())
        .map(|l| {
            format!(
                "{} at {} side {}: exponent {:.4} (want {:.4}), constant {:.4} (want {:.4})",
                l.what, l.at, l.side, l.fitted_exponent, l.expected_exponent, l.fitted_constant,
                l.expected_constant
            )
        })
        .collect();
    checks.push(Check {
        name: "local-forms".into(),
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{} one-sided fits within 0.02", local_forms.len())
        } else {
            bad.join("; ")
        },
    });
    checks.push(Check {
        name: "convexity".into(),
        pass: convex_ok,
        detail: "concave to the left and convex to the right of each fixed point".into(),
    });

    // Fixed points are exact, with unit derivative.
    let mut fixed_ok = true;
    for fp in &map.fixed_points {
        if map.apply(fp.position) != fp.position || (map.deriv(fp.position) - 1.0).abs() > 1e-10 {
            fixed_ok = false;
        }
    }
    checks.push(Check {
        name: "fixed-points".into(),
        pass: fixed_ok,
        detail: format!("f(xi) == xi and f'(xi) == 1 at {:?}", map.positions()),
    });

    // Monotone, full branches; expansion away from the fixed points.
    let mut monotone = true;
    let mut full = true;
    let mut min_outside = f64::INFINITY;
    let mut min_all = f64::INFINITY;
    for br in &map.branches {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=SAMPLES {
            let x = br.lo + (br.hi - br.lo) * i as f64 / SAMPLES as f64;
            let y = br.eval(x);
            if !(y > prev) {
                monotone = false;
            }
            prev = y;
            if i == 0 || i == SAMPLES {
                continue;
            }
            let dfx = br.deriv(x);
            min_all = min_all.min(dfx);
            let near = map
                .fixed_points
                .iter()
                .any(|p| (x - p.position).abs() < 0.01);
            if !near {
                min_outside = min_outside.min(dfx);
            }
        }
        if (br.eval(br.lo) - dom.0).abs() > 1e-12 || (br.eval(br.hi) - dom.1).abs() > 1e-12 {
            full = false;
        }
    }
    checks.push(Check {
        name: "monotone-branches".into(),
        pass: monotone,
        detail: format!("{SAMPLES} samples per branch"),
    });
    checks.push(Check {
        name: "full-branches".into(),
        pass: full,
        detail: "each branch maps onto the phase interval (1e-12)".into(),
    });

    let mut induced_min = None;
    if map.clm.is_some() {
        let y = InducingSet::build(map)?;
        let mut m = f64::INFINITY;
        for &(a, b) in &y.pieces {
            for i in 1..400 {
                let x = a + (b - a) * i as f64 / 400.0;
                if let Some(d) = y.return_derivative(map, x, 10_000_000) {
                    m = m.min(d);
                }
            }
        }
        induced_min = Some(m);
        checks.push(Check {
            name: "induced-expansion".into(),
            pass: m > 1.0,
            detail: format!("min sampled derivative of the first-return map {m:.4}"),
        });
    } else {
        checks.push(Check {
            name: "expansion".into(),
            pass: min_outside > 1.0 && min_all >= 1.0 - 1e-12,
            detail: format!("min f' away from the fixed points {min_outside:.4}"),
        });
    }

    Ok(ValidationReport {
        map: map.describe(),
        checks,
        local_forms,
        min_derivative_outside: min_outside,
        induced_min_derivative: induced_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{build_clm_map, build_clm_map_singular, build_thaler_map};

    #[test]
    fn reference_maps_validate() {
        let maps = [
            build_thaler_map(0.5, &[0.5], None).unwrap(),
            build_thaler_map(0.7, &[0.4], None).unwrap(),
            build_thaler_map(0.5, &[1.0 / 3.0, 2.0 / 3.0], None).unwrap(),
            build_clm_map(2.0).unwrap(),
            build_clm_map(3.0).unwrap(),
        ];
        for m in &maps {
            let r = validate_map(m).unwrap();
            assert!(r.pass(), "{}: {:#?}", m.describe(), r.checks);
        }
    }

    #[test]
    fn singular_family_local_forms() {
        let m = build_clm_map_singular(4.0, 0.5, 0.5, 0.1).unwrap();
        let r = validate_map(&m).unwrap();
        assert_eq!(r.local_forms.len(), 4);
        assert!(r.pass(), "{:#?}", r);
    }
}
