//! Piecewise-increasing interval maps with neutral fixed points.

mod branch;
mod validate;

pub use branch::{Blend, Branch, BranchForm, Exponent, PowerForm};
pub use validate::{validate_map, Check, LocalForm, ValidationReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right end of the quintic glue in the singular family; `s` is the identity beyond it.
pub const BLEND_END: f64 = 0.5;

fn default_blend_point() -> f64 {
    0.1
}

/// Serializable description of a map; [`MapSpec::build`] constructs it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapSpec {
    Thaler {
        alpha: f64,
        cuts: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interior_fixed_points: Option<Vec<f64>>,
    },
    Clm {
        ell: f64,
    },
    ClmSingular {
        ell: f64,
        k_plus: f64,
        k_minus: f64,
        #[serde(default = "default_blend_point")]
        blend_point: f64,
    },
}

impl MapSpec {
    pub fn build(&self) -> Result<IntervalMap> {
        match self {
            MapSpec::Thaler {
                alpha,
                cuts,
                interior_fixed_points,
            } => build_thaler_map(*alpha, cuts, interior_fixed_points.as_deref()),
            MapSpec::Clm { ell } => build_clm_map(*ell),
            MapSpec::ClmSingular {
                ell,
                k_plus,
                k_minus,
                blend_point,
            } => build_clm_map_singular(*ell, *k_plus, *k_minus, *blend_point),
        }
    }

    pub fn is_clm(&self) -> bool {
        !matches!(self, MapSpec::Thaler { .. })
    }
}

/// A neutral fixed point: `|f(x) - x| ~ b |x - xi|^(1+p)` on its branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub position: f64,
    pub branch: usize,
    /// Number of sides of the phase interval around the point (1 at an endpoint).
    pub sidedness: u8,
    pub b: f64,
    pub p: f64,
}

impl FixedPoint {
    /// Directions (`-1.0`, `+1.0`) in which the phase interval extends.
    pub fn sides(&self, domain: (f64, f64)) -> Vec<f64> {
        let mut s = Vec::with_capacity(2);
        if self.position > domain.0 {
            s.push(-1.0);
        }
        if self.position < domain.1 {
            s.push(1.0);
        }
        s
    }
}

/// Parameters of the two-branch family on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClmParams {
    pub ell_plus: f64,
    pub ell_minus: f64,
    pub k_plus: f64,
    pub k_minus: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub b_plus: f64,
    pub b_minus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalMap {
    pub spec: MapSpec,
    pub domain: (f64, f64),
    pub branches: Vec<Branch>,
    /// Interior branch boundaries; a cut belongs to the branch on its right.
    pub cuts: Vec<f64>,
    pub fixed_points: Vec<FixedPoint>,
    pub alpha: f64,
    pub clm: Option<ClmParams>,
}

impl IntervalMap {
    pub fn d(&self) -> usize {
        self.fixed_points.len()
    }

    pub fn length(&self) -> f64 {
        self.domain.1 - self.domain.0
    }

    #[inline(always)]
    pub fn branch_index(&self, x: f64) -> usize {
        self.cuts.partition_point(|&c| c <= x)
    }

    /// `f(x)` without a domain check.
    #[inline(always)]
    pub fn apply(&self, x: f64) -> f64 {
        self.branches[self.branch_index(x)].eval(x)
    }

    pub fn check_domain(&self, x: f64) -> Result<()> {
        if x >= self.domain.0 && x <= self.domain.1 {
            Ok(())
        } else {
            Err(Error::OutsidePhaseInterval {
                x,
                lo: self.domain.0,
                hi: self.domain.1,
            })
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.apply(x))
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.branches[self.branch_index(x)].deriv(x)
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        self.branches[self.branch_index(x)].second_deriv(x)
    }

    /// Index of the fixed point at exactly `x`, if any.
    pub fn fixed_point_at(&self, x: f64) -> Option<usize> {
        self.fixed_points.iter().position(|p| p.position == x)
    }

    pub fn positions(&self) -> Vec<f64> {
        self.fixed_points.iter().map(|p| p.position).collect()
    }

    /// Maps `u` in `[0, 1]` affinely onto the phase interval.
    pub fn from_unit(&self, u: f64) -> f64 {
        self.domain.0 + self.length() * u
    }

    pub fn describe(&self) -> String {
        match &self.spec {
            MapSpec::Thaler { alpha, cuts, .. } => {
                format!("thaler(alpha={alpha}, cuts={cuts:?})")
            }
            MapSpec::Clm { ell } => format!("clm(ell={ell})"),
            MapSpec::ClmSingular {
                ell,
                k_plus,
                k_minus,
                ..
            } => format!("clm-singular(ell={ell}, k+={k_plus}, k-={k_minus})"),
        }
    }
}

pub fn build_thaler_map(
    alpha: f64,
    cuts: &[f64],
    interior_fixed_points: Option<&[f64]>,
) -> Result<IntervalMap> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if cuts.is_empty() {
        return Err(Error::InvalidParameter("at least one cut is required".into()));
    }
    let mut prev = 0.0;
    for &c in cuts {
        if !(c > prev && c < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cuts must be strictly increasing inside (0, 1), got {cuts:?}"
            )));
        }
        prev = c;
    }
    let d = cuts.len() + 1;
    if d >= 3 && alpha == 1.0 {
        return Err(Error::InvalidParameter(
            "alpha = 1 with an interior fixed point: the branch is not C^2 at the fixed point"
                .into(),
        ));
    }
    let interior = d - 2;
    if let Some(pts) = interior_fixed_points {
        if pts.len() != interior {
            return Err(Error::InvalidParameter(format!(
                "expected {interior} interior fixed points, got {}",
                pts.len()
            )));
        }
    }
    let q = 1.0 + 1.0 / alpha;
    let mut branches = Vec::with_capacity(d);
    let mut fixed_points = Vec::with_capacity(d);
    for k in 0..d {
        let lo = if k == 0 { 0.0 } else { cuts[k - 1] };
        let hi = if k == d - 1 { 1.0 } else { cuts[k] };
        let (xi, b) = if k == 0 {
            (0.0, (1.0 - hi) / hi.powf(q))
        } else if k == d - 1 {
            (1.0, lo / (1.0 - lo).powf(q))
        } else {
            // Equal constants on both sides of xi: (v - xi) / (xi - u) = ((1 - v) / u)^(1/q).
            let r = ((1.0 - hi) / lo).powf(1.0 / q);
            let natural = (hi + r * lo) / (1.0 + r);
            let xi = match interior_fixed_points {
                Some(pts) => pts[k - 1],
                None => natural,
            };
            if !(xi > lo && xi < hi) {
                return Err(Error::InfeasibleGluing {
                    branch: k,
                    residual: f64::INFINITY,
                });
            }
            let bl = lo / (xi - lo).powf(q);
            let br = (1.0 - hi) / (hi - xi).powf(q);
            let residual = (bl - br).abs() / bl.max(br);
            if residual > 1e-9 {
                return Err(Error::InfeasibleGluing {
                    branch: k,
                    residual,
                });
            }
            (xi, 0.5 * (bl + br))
        };
        branches.push(Branch {
            lo,
            hi,
            form: BranchForm::Power(PowerForm::new(xi, b, q)),
        });
        fixed_points.push(FixedPoint {
            position: xi,
            branch: k,
            sidedness: if k == 0 || k == d - 1 { 1 } else { 2 },
            b,
            p: 1.0 / alpha,
        });
    }
    Ok(IntervalMap {
        spec: MapSpec::Thaler {
            alpha,
            cuts: cuts.to_vec(),
            interior_fixed_points: interior_fixed_points.map(|p| p.to_vec()),
        },
        domain: (0.0, 1.0),
        branches,
        cuts: cuts.to_vec(),
        fixed_points,
        alpha,
        clm: None,
    })
}

pub fn build_clm_map(ell: f64) -> Result<IntervalMap> {
    if !(ell > 1.0) || !ell.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ell = {ell} must exceed 1 so that alpha = 1/ell lies in (0, 1)"
        )));
    }
    assemble_clm(ell, 1.0, 1.0, 0.1, MapSpec::Clm { ell })
}

pub fn build_clm_map_singular(
    ell: f64,
    k_plus: f64,
    k_minus: f64,
    blend_point: f64,
) -> Result<IntervalMap> {
    if !(ell > 0.0 && k_plus > 0.0 && k_minus > 0.0) {
        return Err(Error::InvalidParameter(
            "ell, k_plus and k_minus must be positive".into(),
        ));
    }
    let alpha_plus = 1.0 / (ell * k_minus);
    let alpha_minus = 1.0 / (ell * k_plus);
    if (alpha_plus - alpha_minus).abs() > 1e-12 {
        return Err(Error::AlphaMismatch {
            plus: alpha_plus,
            minus: alpha_minus,
        });
    }
    if !(alpha_plus < 1.0) {
        return Err(Error::AlphaOutOfRange(alpha_plus));
    }
    if !(blend_point > 0.0 && blend_point < BLEND_END) {
        return Err(Error::InvalidParameter(format!(
            "blend point {blend_point} must lie in (0, {BLEND_END})"
        )));
    }
    assemble_clm(
        ell,
        k_plus,
        k_minus,
        blend_point,
        MapSpec::ClmSingular {
            ell,
            k_plus,
            k_minus,
            blend_point,
        },
    )
}

fn assemble_clm(
    ell: f64,
    k_plus: f64,
    k_minus: f64,
    blend_point: f64,
    spec: MapSpec,
) -> Result<IntervalMap> {
    let q = 1.0 + ell;
    let outer = PowerForm::new(1.0, 1.0, q);
    // For k < 1 the power piece is scaled so that s(x0) = x0; otherwise s(x) > x
    // pushes f above the diagonal and creates extra fixed points.
    let scale = |k: f64| blend_point.powf(1.0 - k).min(1.0);
    let side = |k: f64, mirrored: bool, lo: f64, hi: f64| -> Result<Branch> {
        let form = if k == 1.0 {
            let xi = if mirrored { -1.0 } else { 1.0 };
            BranchForm::Power(PowerForm::new(xi, 1.0, q))
        } else {
            let inner = Blend::new(k, scale(k), blend_point, BLEND_END);
            let (slope, at) = inner.min_glue_slope(10_000);
            if !(slope > 0.0) || inner.eval(blend_point) >= BLEND_END {
                return Err(Error::NonMonotoneGlue { at });
            }
            BranchForm::Reparam {
                outer,
                inner,
                mirrored,
            }
        };
        let branch = Branch { lo, hi, form };
        // The only fixed point of a branch must be its neutral endpoint.
        let n = 20_000;
        for i in 1..n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            let above = branch.displacement(x) > 0.0;
            if above != mirrored {
                return Err(Error::ExtraFixedPoint { at: x });
            }
        }
        Ok(branch)
    };
    let branches = vec![side(k_minus, true, -1.0, 0.0)?, side(k_plus, false, 0.0, 1.0)?];
    let alpha = 1.0 / (ell * k_plus);
    let fixed_points = vec![
        FixedPoint {
            position: -1.0,
            branch: 0,
            sidedness: 1,
            b: 1.0,
            p: ell,
        },
        FixedPoint {
            position: 1.0,
            branch: 1,
            sidedness: 1,
            b: 1.0,
            p: ell,
        },
    ];
    Ok(IntervalMap {
        spec,
        domain: (-1.0, 1.0),
        branches,
        cuts: vec![0.0],
        fixed_points,
        alpha,
        clm: Some(ClmParams {
            ell_plus: ell,
            ell_minus: ell,
            k_plus,
            k_minus,
            a_plus: scale(k_plus) * (2.0 + ell),
            a_minus: scale(k_minus) * (2.0 + ell),
            b_plus: 1.0,
            b_minus: 1.0,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_half_has_b_four() {
        let m = build_thaler_map(0.5, &[0.5], None).unwrap();
        assert_eq!(m.fixed_points[0].b, 4.0);
        assert_eq!(m.fixed_points[1].b, 4.0);
        assert_eq!(m.apply(0.25), 0.25 + 4.0 * 0.25f64.powi(3));
    }

    #[test]
    fn asymmetric_constants() {
        let m = build_thaler_map(0.5, &[0.4], None).unwrap();
        assert!((m.fixed_points[0].b - 9.375).abs() < 1e-12);
        assert!((m.fixed_points[1].b - 0.4 / 0.6f64.powi(3)).abs() < 1e-12);
        // b_1 = (1 - c) c^(-(1 + 1/alpha))
        assert!((m.fixed_points[0].b - 0.6 * 0.4f64.powf(-3.0)).abs() < 1e-12);
    }

    #[test]
    fn three_branch_symmetric_gluing() {
        let m = build_thaler_map(0.5, &[1.0 / 3.0, 2.0 / 3.0], None).unwrap();
        assert!((m.fixed_points[1].position - 0.5).abs() < 1e-14);
        assert!((m.fixed_points[0].b - 18.0).abs() < 1e-9);
        assert!((m.fixed_points[1].b - 72.0).abs() < 1e-9);
        assert!((m.fixed_points[2].b - 18.0).abs() < 1e-9);
        assert_eq!(m.fixed_points[1].sidedness, 2);
    }

    #[test]
    fn misplaced_interior_point_is_infeasible() {
        let e = build_thaler_map(0.5, &[1.0 / 3.0, 2.0 / 3.0], Some(&[0.45])).unwrap_err();
        assert!(matches!(e, Error::InfeasibleGluing { branch: 1, .. }));
        assert!(build_thaler_map(0.5, &[1.0 / 3.0, 2.0 / 3.0], Some(&[0.5])).is_ok());
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(build_thaler_map(1.5, &[0.5], None), Err(Error::AlphaOutOfRange(_))));
        assert!(build_thaler_map(0.5, &[0.6, 0.4], None).is_err());
        assert!(build_thaler_map(1.0, &[0.3, 0.6], None).is_err());
        assert!(build_clm_map(1.0).is_err());
        assert!(matches!(
            build_clm_map_singular(2.0, 1.0, 0.8, 0.1),
            Err(Error::AlphaMismatch { .. })
        ));
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let m = build_thaler_map(0.5, &[0.5], None).unwrap();
        assert!(matches!(m.eval(1.5), Err(Error::OutsidePhaseInterval { .. })));
    }

    #[test]
    fn clm_branches() {
        let m = build_clm_map(2.0).unwrap();
        assert_eq!(m.apply(-1.0), -1.0);
        assert_eq!(m.apply(1.0), 1.0);
        assert_eq!(m.apply(0.0), -1.0);
        assert!((m.apply(-1e-12) - 1.0).abs() < 1e-10);
        assert!((m.apply(-0.5) - (-0.5 + 0.125)).abs() < 1e-15);
    }

    #[test]
    fn singular_family_with_unit_k_is_the_smooth_map() {
        let a = build_clm_map(3.0).unwrap();
        let b = build_clm_map_singular(3.0, 1.0, 1.0, 0.1).unwrap();
        for i in 0..=1000 {
            let x = -1.0 + 2.0 * i as f64 / 1000.0;
            assert_eq!(a.apply(x), b.apply(x));
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = MapSpec::ClmSingular {
            ell: 4.0,
            k_plus: 0.5,
            k_minus: 0.5,
            blend_point: 0.1,
        };
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"family\":\"clm-singular\""));
        let back: MapSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let t: MapSpec = serde_json::from_str(r#"{"family":"thaler","alpha":0.5,"cuts":[0.5]}"#).unwrap();
        assert!(t.build().is_ok());
        assert!(serde_json::from_str::<MapSpec>(r#"{"family":"clm","ell":2,"bogus":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn thaler_branches_are_full(alpha in 0.2f64..1.0, c in 0.1f64..0.9) {
            let m = build_thaler_map(alpha, &[c], None).unwrap();
            prop_assert!((m.branches[0].eval(c) - 1.0).abs() < 1e-12);
            prop_assert!(m.branches[1].eval(c).abs() < 1e-12);
        }

        #[test]
        fn thaler_three_branches_are_full(alpha in 0.2f64..0.95, c1 in 0.1f64..0.45, w in 0.1f64..0.45) {
            let c2 = c1 + w;
            let m = build_thaler_map(alpha, &[c1, c2], None).unwrap();
            for br in &m.branches {
                prop_assert!(br.eval(br.lo).abs() < 1e-12);
                prop_assert!((br.eval(br.hi) - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn inverse_is_right_inverse(y in 0.0f64..1.0) {
            let m = build_thaler_map(0.5, &[0.4], None).unwrap();
            for br in &m.branches {
                let z = br.inverse(y);
                prop_assert!((br.eval(z) - y).abs() < 1e-13);
            }
        }

        #[test]
        fn clm_ell_two_is_conjugate_to_symmetric_thaler(x in 0.0f64..1.0) {
            let t = build_thaler_map(0.5, &[0.5], None).unwrap();
            let c = build_clm_map(2.0).unwrap();
            // y = 2x - 1 conjugates the two maps.
            let lhs = c.apply(2.0 * x - 1.0);
            let rhs = 2.0 * t.apply(x) - 1.0;
            prop_assert!((lhs - rhs).abs() < 1e-13);
        }
    }
}
