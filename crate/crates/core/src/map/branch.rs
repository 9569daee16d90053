use serde::{Deserialize, Serialize};

/// Exponent of a power term. Integer exponents use `powi`, which is much
/// cheaper than `powf` in the iteration hot loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Exponent {
    Int(i32),
    Real(f64),
}

impl Exponent {
    pub fn new(q: f64) -> Self {
        let r = q.round();
        if (q - r).abs() < 1e-12 && r.abs() <= 64.0 {
            Exponent::Int(r as i32)
        } else {
            Exponent::Real(q)
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Int(n) => n as f64,
            Exponent::Real(q) => q,
        }
    }

    #[inline(always)]
    pub fn pow(self, u: f64) -> f64 {
        match self {
            Exponent::Int(n) => u.powi(n),
            Exponent::Real(q) => u.powf(q),
        }
    }
}

/// `x + b sgn(x - xi) |x - xi|^q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerForm {
    pub xi: f64,
    pub b: f64,
    pub q: Exponent,
}

impl PowerForm {
    pub fn new(xi: f64, b: f64, q: f64) -> Self {
        Self {
            xi,
            b,
            q: Exponent::new(q),
        }
    }

    #[inline(always)]
    pub fn eval(&self, x: f64) -> f64 {
        let d = x - self.xi;
        x + (self.b * self.q.pow(d.abs())).copysign(d)
    }

    #[inline(always)]
    pub fn displacement(&self, x: f64) -> f64 {
        let d = x - self.xi;
        (self.b * self.q.pow(d.abs())).copysign(d)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let q = self.q.value();
        1.0 + self.b * q * (x - self.xi).abs().powf(q - 1.0)
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        let q = self.q.value();
        let d = x - self.xi;
        (self.b * q * (q - 1.0) * d.abs().powf(q - 2.0)).copysign(d)
    }

    /// Solves `delta + b sgn(delta) |delta|^q = t`.
    pub fn solve_offset(&self, t: f64) -> f64 {
        let a = t.abs();
        if a == 0.0 {
            return 0.0;
        }
        let q = self.q.value();
        // Newton from above the root converges monotonically (convex, increasing).
        let mut u = a.min((a / self.b).powf(1.0 / q));
        for _ in 0..200 {
            let pq1 = self.q.pow(u) / u;
            let phi = u + self.b * pq1 * u - a;
            let dphi = 1.0 + self.b * q * pq1;
            let step = phi / dphi;
            let next = u - step;
            if !(next > 0.0) {
                u *= 0.5;
                continue;
            }
            if step.abs() <= 4.0 * f64::EPSILON * next {
                u = next;
                break;
            }
            u = next;
        }
        u.copysign(t)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        self.xi + self.solve_offset(y - self.xi)
    }
}

/// `s : [0, 1] -> [0, 1]`: `c x^k` on `[0, x0]`, a quintic on `[x0, x1]` matching
/// value, slope and curvature at both ends, and the identity on `[x1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blend {
    pub k: f64,
    pub c: f64,
    pub x0: f64,
    pub x1: f64,
    coeffs: [f64; 6],
}

impl Blend {
    pub fn new(k: f64, c: f64, x0: f64, x1: f64) -> Self {
        let l = x1 - x0;
        let c0 = c * x0.powf(k);
        let c1 = c * k * x0.powf(k - 1.0);
        let c2 = 0.5 * c * k * (k - 1.0) * x0.powf(k - 2.0);
        let r0 = (x1 - (c0 + c1 * l + c2 * l * l)) / l.powi(3);
        let r1 = (1.0 - (c1 + 2.0 * c2 * l)) / (l * l);
        let r2 = (-2.0 * c2) / l;
        let a3 = 10.0 * r0 - 4.0 * r1 + 0.5 * r2;
        let a4 = -15.0 * r0 + 7.0 * r1 - r2;
        let a5 = 6.0 * r0 - 3.0 * r1 + 0.5 * r2;
        Self {
            k,
            c,
            x0,
            x1,
            coeffs: [c0, c1, c2, a3, a4 / l, a5 / (l * l)],
        }
    }

    #[inline]
    fn poly(&self, t: f64) -> f64 {
        let c = &self.coeffs;
        c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))))
    }

    fn poly_d(&self, t: f64) -> f64 {
        let c = &self.coeffs;
        c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])))
    }

    fn poly_dd(&self, t: f64) -> f64 {
        let c = &self.coeffs;
        2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.x0 {
            self.c * x.powf(self.k)
        } else if x < self.x1 {
            self.poly(x - self.x0)
        } else {
            x
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        if x <= self.x0 {
            self.c * self.k * x.powf(self.k - 1.0)
        } else if x < self.x1 {
            self.poly_d(x - self.x0)
        } else {
            1.0
        }
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        if x <= self.x0 {
            self.c * self.k * (self.k - 1.0) * x.powf(self.k - 2.0)
        } else if x < self.x1 {
            self.poly_dd(x - self.x0)
        } else {
            0.0
        }
    }

    /// `s(x) - x`, exactly zero on the identity piece.
    pub fn excess(&self, x: f64) -> f64 {
        if x >= self.x1 {
            0.0
        } else {
            self.eval(x) - x
        }
    }

    pub fn inverse(&self, u: f64) -> f64 {
        if u >= self.x1 {
            return u;
        }
        let u0 = self.coeffs[0];
        if u <= u0 {
            return (u / self.c).powf(1.0 / self.k);
        }
        // Safeguarded Newton on the quintic piece.
        let (mut lo, mut hi) = (0.0, self.x1 - self.x0);
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.poly(t) - u;
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let d = self.poly_d(t);
            let mut next = t - f / d;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 1e-16 * (self.x0 + next).abs() || hi - lo <= 1e-16 {
                t = next;
                break;
            }
            t = next;
        }
        self.x0 + t
    }

    /// Smallest sampled `s'` on the glue piece, with its location.
    pub fn min_glue_slope(&self, samples: usize) -> (f64, f64) {
        let l = self.x1 - self.x0;
        (0..=samples)
            .map(|i| {
                let t = l * i as f64 / samples as f64;
                (self.poly_d(t), self.x0 + t)
            })
            .fold((f64::INFINITY, self.x0), |acc, v| if v.0 < acc.0 { v } else { acc })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BranchForm {
    Power(PowerForm),
    /// `outer(s(x))` on `[0, 1]`, or `-outer(s(-x))` on `[-1, 0)` when mirrored.
    Reparam {
        outer: PowerForm,
        inner: Blend,
        mirrored: bool,
    },
}

/// One full increasing branch on `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    pub form: BranchForm,
}

impl Branch {
    #[inline(always)]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.form {
            BranchForm::Power(p) => p.eval(x),
            BranchForm::Reparam {
                outer,
                inner,
                mirrored,
            } => {
                if *mirrored {
                    -outer.eval(inner.eval(-x))
                } else {
                    outer.eval(inner.eval(x))
                }
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match &self.form {
            BranchForm::Power(p) => p.deriv(x),
            BranchForm::Reparam {
                outer,
                inner,
                mirrored,
            } => {
                let y = if *mirrored { -x } else { x };
                outer.deriv(inner.eval(y)) * inner.deriv(y)
            }
        }
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        match &self.form {
            BranchForm::Power(p) => p.second_deriv(x),
            BranchForm::Reparam {
                outer,
                inner,
                mirrored,
            } => {
                let y = if *mirrored { -x } else { x };
                let s = inner.eval(y);
                let v = outer.second_deriv(s) * inner.deriv(y).powi(2)
                    + outer.deriv(s) * inner.second_deriv(y);
                if *mirrored {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// `f(x) - x`, accurate near the neutral point.
    pub fn displacement(&self, x: f64) -> f64 {
        match &self.form {
            BranchForm::Power(p) => p.displacement(x),
            BranchForm::Reparam {
                outer,
                inner,
                mirrored,
            } => {
                let y = if *mirrored { -x } else { x };
                let v = inner.excess(y) + outer.displacement(inner.eval(y));
                if *mirrored {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// Preimage of `y` in this branch.
    pub fn inverse(&self, y: f64) -> f64 {
        let x = match &self.form {
            BranchForm::Power(p) => p.inverse(y),
            BranchForm::Reparam {
                outer,
                inner,
                mirrored,
            } => {
                if *mirrored {
                    -inner.inverse(outer.inverse(-y))
                } else {
                    inner.inverse(outer.inverse(y))
                }
            }
        };
        x.clamp(self.lo, self.hi)
    }

    /// Neutral point of the branch's power form, if it has one.
    pub fn neutral_point(&self) -> f64 {
        match &self.form {
            BranchForm::Power(p) => p.xi,
            BranchForm::Reparam { mirrored, .. } => {
                if *mirrored {
                    -1.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Given `t = y - xi`, returns `x - xi` where `x` is the preimage of `y`.
    /// Works in offsets so that points very close to `xi` keep full precision.
    pub fn inverse_offset(&self, t: f64) -> f64 {
        match &self.form {
            BranchForm::Power(p) => p.solve_offset(t),
            BranchForm::Reparam {
                outer,
                inner,
                mirrored,
            } => {
                let t = if *mirrored { -t } else { t };
                let du = outer.solve_offset(t);
                let u = 1.0 + du;
                let d = if u >= inner.x1 {
                    du
                } else {
                    inner.inverse(u) - 1.0
                };
                if *mirrored {
                    -d
                } else {
                    d
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn integer_exponents_are_detected() {
        assert_eq!(Exponent::new(3.0), Exponent::Int(3));
        assert_eq!(Exponent::new(1.0 + 1.0 / 0.5), Exponent::Int(3));
        assert!(matches!(Exponent::new(2.5), Exponent::Real(_)));
    }

    #[test]
    fn blend_matches_at_both_joints() {
        for &k in &[0.5, 0.8, 1.5, 2.0] {
            let s = Blend::new(k, 0.1f64.powf((1.0 - k).max(0.0)), 0.1, 0.5);
            let e = 1e-9;
            for &x in &[0.1, 0.5] {
                assert!((s.eval(x - e) - s.eval(x + e)).abs() < 1e-7);
                assert!((s.deriv(x - e) - s.deriv(x + e)).abs() < 1e-6);
                assert!((s.second_deriv(x - e) - s.second_deriv(x + e)).abs() < 1e-4);
            }
            assert_eq!(s.eval(0.95), 0.95);
        }
    }

    #[test]
    fn offset_inverse_keeps_precision_near_the_fixed_point() {
        let p = PowerForm::new(1.0, 1.0, 3.0);
        let d = -1e-9;
        let t = p.displacement(1.0 + d) + d;
        assert!((p.solve_offset(t) / d - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn power_inverse_round_trips(x in 0.0f64..0.5, b in 0.5f64..20.0, q in 1.2f64..6.0) {
            let p = PowerForm::new(0.0, b, q);
            let y = p.eval(x);
            prop_assert!((p.inverse(y) - x).abs() <= 1e-13 * (1.0 + x));
        }

        #[test]
        fn blend_inverse_round_trips(x in 0.0f64..1.0, k in 0.4f64..2.0) {
            let s = Blend::new(k, 0.1f64.powf((1.0 - k).max(0.0)), 0.1, 0.5);
            prop_assert!((s.inverse(s.eval(x)) - x).abs() < 1e-12);
        }

        #[test]
        fn mirrored_branch_is_odd(x in 0.0f64..1.0) {
            let outer = PowerForm::new(1.0, 1.0, 3.0);
            let inner = Blend::new(0.8, 1.0, 0.1, 0.5);
            let plus = Branch { lo: 0.0, hi: 1.0, form: BranchForm::Reparam { outer, inner: inner.clone(), mirrored: false } };
            let minus = Branch { lo: -1.0, hi: 0.0, form: BranchForm::Reparam { outer, inner, mirrored: true } };
            prop_assert_eq!(minus.eval(-x), -plus.eval(x));
            prop_assert!((minus.inverse(-plus.eval(x)) + x).abs() < 1e-12);
        }
    }
}
