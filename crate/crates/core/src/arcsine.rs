//! Generalized arcsine laws: the two-state Lamperti density, one-sided stable
//! variables and the simplex-valued law built from them.

use rand::Rng;
use rand_distr::{Exp1, Open01};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A probability vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{p:?} is not a probability vector"
            )));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "{p:?} sums to {s}, not 1"
            )));
        }
        Ok(Self(p))
    }

    /// Rescales a nonnegative vector with positive sum onto the simplex.
    pub fn normalized(v: &[f64]) -> Result<Self> {
        let s: f64 = v.iter().sum();
        if !(s > 0.0) || v.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cannot normalize {v:?}"
            )));
        }
        Ok(Self(v.iter().map(|x| x / s).collect()))
    }

    pub fn uniform(d: usize) -> Self {
        Self(vec![1.0 / d as f64; d])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn linf(&self, other: &SimplexPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for SimplexPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexPoint::new(v)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Vec<f64> {
        p.0
    }
}

fn check_lamperti(alpha: f64, p: f64) -> Result<()> {
    if alpha == 1.0 {
        return Err(Error::InvalidParameter(
            "alpha = 1: the limit law is a point mass with no density".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("t = {t} outside [0, 1]")))
    }
}

/// Density of the limit of the occupation fraction near the fixed point with weight `p`.
pub fn lamperti_pdf(alpha: f64, p: f64, t: f64) -> Result<f64> {
    check_lamperti(alpha, p)?;
    check_unit(t)?;
    if t == 0.0 || t == 1.0 {
        return Ok(f64::INFINITY);
    }
    let ph = 1.0 / p - 1.0;
    let u = 1.0 - t;
    let (ta, ua) = (t.powf(alpha), u.powf(alpha));
    let num = ta * ua / u + ta / t * ua;
    let den = ph * ph * ta * ta + 2.0 * ph * ta * ua * (PI * alpha).cos() + ua * ua;
    Ok(ph * (PI * alpha).sin() / PI * num / den)
}

/// Distribution function of [`lamperti_pdf`] by double-exponential quadrature
/// after removing the endpoint singularities with `t = s^(1/alpha)` near 0 and
/// `1 - t = w^(1/alpha)` near 1.
pub fn lamperti_cdf(alpha: f64, p: f64, t: f64) -> Result<f64> {
    check_lamperti(alpha, p)?;
    check_unit(t)?;
    let ph = 1.0 / p - 1.0;
    let k = ph * (PI * alpha).sin() / (PI * alpha);
    let co = (PI * alpha).cos();
    // Near 0: with t = s^(1/a), u = 1 - t, the integrand becomes (t u^(a-1) + u^a) / den.
    let lower = |s: f64| {
        let t = s.powf(1.0 / alpha);
        let u = 1.0 - t;
        let ua = u.powf(alpha);
        let den = ph * ph * s * s + 2.0 * ph * s * ua * co + ua * ua;
        k * (t * ua / u + ua) / den
    };
    // Near 1: with u = 1 - t = w^(1/a), the integrand becomes (t^a + t^(a-1) u) / den.
    let upper = |w: f64| {
        let u = w.powf(1.0 / alpha);
        let t = 1.0 - u;
        let ta = t.powf(alpha);
        let den = ph * ph * ta * ta + 2.0 * ph * ta * w * co + w * w;
        k * (ta + ta / t * u) / den
    };
    let integrate = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        adaptive(f, a, b, 1e-13, 0)
    };
    let half = 0.5f64.powf(alpha);
    if t <= 0.5 {
        integrate(&lower, 0.0, t.powf(alpha))
    } else {
        Ok(integrate(&lower, 0.0, half)? + integrate(&upper, (1.0 - t).powf(alpha), half)?)
    }
}

/// Double-exponential quadrature, bisecting while its error estimate is too large.
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let out = quadrature::double_exponential::integrate(f, a, b, tol);
    if out.integral.is_finite() && out.error_estimate <= tol.max(1e-15) {
        return Ok(out.integral);
    }
    if depth >= 30 {
        return Err(Error::Quadrature(format!(
            "error estimate {:.2e} on [{a}, {b}]",
            out.error_estimate
        )));
    }
    let m = 0.5 * (a + b);
    Ok(adaptive(f, a, m, 0.5 * tol, depth + 1)? + adaptive(f, m, b, 0.5 * tol, depth + 1)?)
}

/// A one-sided stable variable with `E exp(-t zeta) = exp(-t^alpha p)`,
/// by Kanter's representation.
pub fn sample_stable<R: Rng + ?Sized>(alpha: f64, p: f64, rng: &mut R) -> f64 {
    let u = PI * rng.sample::<f64, _>(Open01);
    let e: f64 = rng.sample(Exp1);
    if p == 0.0 {
        return 0.0;
    }
    let ln_a = (alpha * (alpha * u).sin().ln() + (1.0 - alpha) * ((1.0 - alpha) * u).sin().ln()
        - u.sin().ln())
        / (1.0 - alpha);
    let zeta = ((1.0 - alpha) / alpha * (ln_a - e.ln())).exp();
    p.powf(1.0 / alpha) * zeta
}

/// `Z = zeta / sum(zeta)` with independent stable components weighted by `p`.
/// For `alpha = 1` the law is the point mass at `p`.
pub fn sample_z<R: Rng + ?Sized>(alpha: f64, p: &SimplexPoint, rng: &mut R) -> Result<SimplexPoint> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if alpha == 1.0 {
        return Ok(p.clone());
    }
    let zeta: Vec<f64> = p
        .as_slice()
        .iter()
        .map(|&pk| sample_stable(alpha, pk, rng))
        .collect();
    SimplexPoint::normalized(&zeta)
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn classical_arcsine_pdf() {
        for i in 1..=9 {
            let t = i as f64 / 10.0;
            let want = 1.0 / (PI * (t * (1.0 - t)).sqrt());
            assert!((lamperti_pdf(0.5, 0.5, t).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn classical_arcsine_cdf() {
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let want = 2.0 / PI * t.sqrt().asin();
            let got = lamperti_cdf(0.5, 0.5, t).unwrap();
            assert!((got - want).abs() < 1e-8, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn cdf_normalization_across_parameters() {
        for &a in &[0.2, 0.5, 0.8] {
            for &p in &[0.1, 0.3, 0.7] {
                let one = lamperti_cdf(a, p, 1.0).unwrap();
                assert!((one - 1.0).abs() < 1e-8, "alpha={a} p={p}: {one}");
                assert_eq!(lamperti_cdf(a, p, 0.0).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn first_component_of_z_follows_lamperti() {
        let (a, p0) = (0.3, 0.7);
        let p = SimplexPoint::new(vec![p0, 1.0 - p0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z: Vec<f64> = (0..20_000).map(|_| sample_z(a, &p, &mut rng).unwrap()[0]).collect();
        let d = ks_statistic(&z, |t| lamperti_cdf(a, p0, t).unwrap());
        assert!(d < 0.015, "KS = {d}");
    }

    #[test]
    fn lamperti_errors() {
        assert!(lamperti_pdf(1.0, 0.5, 0.5).is_err());
        assert!(lamperti_pdf(0.5, 0.0, 0.5).is_err());
        assert!(lamperti_cdf(0.5, 0.5, 1.5).is_err());
    }

    #[test]
    fn simplex_point_validation() {
        assert!(SimplexPoint::new(vec![0.3, 0.7]).is_ok());
        assert!(SimplexPoint::new(vec![0.3, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![-0.1, 1.1]).is_err());
        let p: SimplexPoint = serde_json::from_str("[0.25, 0.75]").unwrap();
        assert_eq!(p[1], 0.75);
        assert!(serde_json::from_str::<SimplexPoint>("[0.5, 0.6]").is_err());
    }

    #[test]
    fn alpha_one_is_deterministic() {
        let p = SimplexPoint::new(vec![0.2, 0.8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_z(1.0, &p, &mut rng).unwrap(), p);
    }

    #[test]
    fn stable_scaling_under_common_seed() {
        for &a in &[0.3, 0.5, 0.8] {
            let mut r1 = ChaCha8Rng::seed_from_u64(9);
            let mut r2 = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..100 {
                let x = sample_stable(a, 1.0, &mut r1);
                let y = sample_stable(a, 2.0, &mut r2);
                assert!((y / x - 2f64.powf(1.0 / a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stable_laplace_transform_small_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let (a, p, t) = (0.5, 1.0, 1.0);
        let v: Vec<f64> = (0..n).map(|_| (-t * sample_stable(a, p, &mut rng)).exp()).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let want = (-t.powf(a) * p).exp();
        assert!((mean - want).abs() < 4.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn ks_edge_cases() {
        let cdf = |t: f64| 2.0 / PI * t.sqrt().asin();
        let s = ks_statistic(&[0.5; 100], cdf);
        assert!((s - 0.5).abs() < 1e-12);
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b: Vec<f64> = (0..100).map(|i| i as f64 + 1000.0).collect();
        assert_eq!(ks_two_sample(&a, &b), 1.0);
    }

    proptest! {
        #[test]
        fn z_is_on_the_simplex(seed in 0u64..1000, a in 0.1f64..0.95, p0 in 0.05f64..0.95) {
            let p = SimplexPoint::new(vec![p0, 1.0 - p0]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = sample_z(a, &p, &mut rng).unwrap();
            prop_assert!(z.as_slice().iter().all(|&v| v >= 0.0));
            prop_assert!((z.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn pdf_is_symmetric_under_swapping_weights(a in 0.1f64..0.9, p in 0.05f64..0.95, t in 0.01f64..0.99) {
            let l = lamperti_pdf(a, p, t).unwrap();
            let r = lamperti_pdf(a, 1.0 - p, 1.0 - t).unwrap();
            prop_assert!((l - r).abs() <= 1e-10 * l.max(1.0));
        }

        #[test]
        fn cdf_is_monotone(a in 0.1f64..0.9, p in 0.05f64..0.95, t in 0.0f64..0.99) {
            let lo = lamperti_cdf(a, p, t).unwrap();
            let hi = lamperti_cdf(a, p, (t + 0.01).min(1.0)).unwrap();
            prop_assert!(hi >= lo - 1e-12);
        }
    }
}
