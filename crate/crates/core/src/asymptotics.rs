//! Power-law fitting, compensated summation and the convolution-type series
//! used as reference values elsewhere in the crate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neumaier's compensated summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

const BLOCK: u64 = 1 << 18;

/// Sums `term(j)` for `j` in `lo..=hi` in fixed-size blocks. Blocks may run in
/// parallel but are combined in index order, so the result does not depend on
/// the number of worker threads.
pub fn blocked_sum<F>(lo: u64, hi: u64, term: F) -> f64
where
    F: Fn(u64) -> f64 + Sync,
{
    if hi < lo {
        return 0.0;
    }
    let blocks = (hi - lo) / BLOCK + 1;
    let partial: Vec<CompensatedSum> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let start = lo + b * BLOCK;
            let end = (start + BLOCK - 1).min(hi);
            (start..=end).map(&term).collect()
        })
        .collect();
    let mut total = CompensatedSum::new();
    for p in partial {
        total.merge(p);
    }
    total.value()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// `exp(intercept)`, i.e. `C` in `a_n ~ C n^slope`.
    pub prefactor: f64,
    pub window: (f64, f64),
    pub residual_rms: f64,
    pub points: usize,
}

/// Weighted least squares of `ln y` against `ln x`.
pub fn fit_loglog(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(Error::Fit("length mismatch".into()));
    }
    if let Some(w) = weights {
        if w.len() != x.len() {
            return Err(Error::Fit("weight length mismatch".into()));
        }
    }
    if x.len() < 2 {
        return Err(Error::Fit("need at least two points".into()));
    }
    let mut lx = Vec::with_capacity(x.len());
    let mut ly = Vec::with_capacity(y.len());
    for (&a, &b) in x.iter().zip(y) {
        if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Fit(format!(
                "non-positive or non-finite entry ({a}, {b}) in fit window"
            )));
        }
        lx.push(a.ln());
        ly.push(b.ln());
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for i in 0..lx.len() {
        sw += w(i);
        sx += w(i) * lx[i];
        sy += w(i) * ly[i];
    }
    let mx = sx / sw;
    let my = sy / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..lx.len() {
        sxx += w(i) * (lx[i] - mx).powi(2);
        sxy += w(i) * (lx[i] - mx) * (ly[i] - my);
    }
    if sxx <= 0.0 {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = 0.0;
    for i in 0..lx.len() {
        ss += w(i) * (ly[i] - intercept - slope * lx[i]).powi(2);
    }
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult {
        slope,
        intercept,
        prefactor: intercept.exp(),
        window: (lo, hi),
        residual_rms: (ss / sw).sqrt(),
        points: x.len(),
    })
}

/// Roughly `per_decade` geometrically spaced distinct integers in `[lo, hi]`.
pub fn geometric_indices(lo: usize, hi: usize, per_decade: usize) -> Vec<usize> {
    assert!(lo >= 1 && hi >= lo);
    let decades = ((hi as f64) / (lo as f64)).log10().max(0.0);
    let count = ((decades * per_decade as f64).ceil() as usize).max(1) + 1;
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1).max(1) as f64;
            ((lo as f64) * ((hi as f64) / (lo as f64)).powf(t)).round() as usize
        })
        .map(|n| n.clamp(lo, hi))
        .collect();
    out.dedup();
    out
}

/// Fits `a_n ~ C n^s` on a geometric subsample of `window` (inclusive).
pub fn fit_power_law<F: Fn(usize) -> f64>(a: F, window: (usize, usize)) -> Result<FitResult> {
    let (lo, hi) = window;
    if lo == 0 || hi <= lo {
        return Err(Error::Fit(format!("bad window [{lo}, {hi}]")));
    }
    let ns = geometric_indices(lo, hi, 40);
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = ns.iter().map(|&n| a(n)).collect();
    fit_loglog(&x, &y, None)
}

/// `sum_{j=1}^{n-1} (n-j)^(alpha-1) j^(-alpha)`, which tends to `pi / sin(pi alpha)`.
pub fn series_one(alpha: f64, n: u64) -> Result<f64> {
    check_alpha_open(alpha)?;
    if n < 2 {
        return Ok(0.0);
    }
    let nf = n as f64;
    Ok(blocked_sum(1, n - 1, |j| {
        let j = j as f64;
        ((alpha - 1.0) * (nf - j).ln() - alpha * j.ln()).exp()
    }))
}

/// The pair `(sum j^(-alpha) g(j) (n-j)^(alpha-1), sum (n-j)^(alpha-1) g(n-j) j^(-alpha))`
/// over `1 <= j <= n-1`.
pub fn series_two(alpha: f64, g: &GFunction, n: u64) -> Result<(f64, f64)> {
    check_alpha_open(alpha)?;
    if n < 2 {
        return Ok((0.0, 0.0));
    }
    let nf = n as f64;
    let first = blocked_sum(1, n - 1, |j| {
        let jf = j as f64;
        ((alpha - 1.0) * (nf - jf).ln() - alpha * jf.ln()).exp() * g.eval(j)
    });
    let second = blocked_sum(1, n - 1, |j| {
        let jf = j as f64;
        ((alpha - 1.0) * (nf - jf).ln() - alpha * jf.ln()).exp() * g.eval(n - j)
    });
    Ok((first, second))
}

/// `(1 / log n) sum_{j=1}^{n} g(j) / j`.
pub fn series_log_one(g: &GFunction, n: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter("n must be at least 2".into()));
    }
    Ok(blocked_sum(1, n, |j| g.eval(j) / j as f64) / (n as f64).ln())
}

/// `sum_{j=1}^{n-2} (g1(j) / j) (g2(n-j) / log(n-j))`.
pub fn series_log_two(g1: &GFunction, g2: &GFunction, n: u64) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidParameter("n must be at least 3".into()));
    }
    Ok(blocked_sum(1, n - 2, |j| {
        let r = n - j;
        g1.eval(j) / j as f64 * g2.eval(r) / (r as f64).ln()
    }))
}

fn check_alpha_open(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must lie in (0, 1)"
        )))
    }
}

/// Test sequences for the series checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GFunction {
    One,
    Zero,
    /// `1 / log(j + 2)`
    InvLog,
    /// `j^(-0.1)`
    Pow01,
    /// `j^(-1/2)`
    InvSqrt,
}

impl GFunction {
    #[inline]
    pub fn eval(&self, j: u64) -> f64 {
        let j = j as f64;
        match self {
            GFunction::One => 1.0,
            GFunction::Zero => 0.0,
            GFunction::InvLog => 1.0 / (j + 2.0).ln(),
            GFunction::Pow01 => j.powf(-0.1),
            GFunction::InvSqrt => 1.0 / j.sqrt(),
        }
    }

    pub fn limit(&self) -> f64 {
        match self {
            GFunction::One => 1.0,
            _ => 0.0,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "one" => GFunction::One,
            "zero" => GFunction::Zero,
            "inv-log" => GFunction::InvLog,
            "pow01" => GFunction::Pow01,
            "inv-sqrt" => GFunction::InvSqrt,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown test sequence '{name}'"
                )))
            }
        })
    }
}

/// Iterates `z_{n+1} = T^{-1}(z_n)` for `T(x) = x + b x^(1+p)`, returning
/// `z_0, ..., z_{len-1}`. Asymptotically `z_n ~ (p b n)^(-1/p)`.
pub fn recursion_sequence(b: f64, p: f64, z0: f64, len: usize) -> Result<Vec<f64>> {
    if !(b > 0.0 && p > 0.0 && z0 > 0.0) {
        return Err(Error::InvalidParameter(
            "b, p and z0 must be positive".into(),
        ));
    }
    let form = crate::map::PowerForm::new(0.0, b, 1.0 + p);
    let mut out = Vec::with_capacity(len);
    let mut z = z0;
    for _ in 0..len {
        out.push(z);
        z = form.solve_offset(z);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let s: CompensatedSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let fit = fit_power_law(|n| 3.0 * (n as f64).powf(-1.5), (10, 10_000)).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-12);
        assert!((fit.prefactor - 3.0).abs() < 1e-10);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn fit_rejects_nonpositive_entries() {
        assert!(fit_power_law(|n| if n == 50 { 0.0 } else { 1.0 }, (10, 100)).is_err());
    }

    #[test]
    fn series_one_at_half_converges() {
        let v = series_one(0.5, 1_000_000).unwrap();
        assert!((v / PI - 1.0).abs() < 1e-3, "{v}");
    }

    #[test]
    fn series_pair_swaps_under_reflection() {
        for g in [GFunction::InvLog, GFunction::Pow01, GFunction::InvSqrt] {
            let (a, _) = series_two(0.3, &g, 20_000).unwrap();
            let (_, b) = series_two(0.7, &g, 20_000).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{g:?}: {a} {b}");
        }
    }

    #[test]
    fn log_series_limits() {
        let one = series_log_one(&GFunction::One, 10_000_000).unwrap();
        // harmonic sum over log n: 1 + gamma / log n
        assert!((one - 1.0 - 0.5772156649 / (1e7f64).ln()).abs() < 1e-6);
        let two = series_log_two(&GFunction::One, &GFunction::One, 1_000_000).unwrap();
        assert!((two - 1.0).abs() < 0.2, "{two}");
    }

    #[test]
    fn recursion_matches_leading_order() {
        let z = recursion_sequence(4.0, 2.0, 0.25, 100_001).unwrap();
        let scaled = z[100_000] * (100_000f64).sqrt();
        assert!((scaled / 8f64.powf(-0.5) - 1.0).abs() < 1e-2, "{scaled}");
    }

    #[test]
    fn g_function_parses_kebab_names() {
        assert_eq!(GFunction::parse("inv-log").unwrap(), GFunction::InvLog);
        assert!(GFunction::parse("nope").is_err());
    }

    proptest! {
        #[test]
        fn blocked_sum_matches_sequential(lo in 1u64..1000, len in 0u64..600_000) {
            let hi = lo + len;
            let seq: CompensatedSum = (lo..=hi).map(|j| 1.0 / j as f64).collect();
            let par = blocked_sum(lo, hi, |j| 1.0 / j as f64);
            prop_assert!((seq.value() - par).abs() <= 1e-13 * seq.value());
        }

        #[test]
        fn fitted_slope_is_scale_invariant(c in 0.01f64..100.0, s in -3.0f64..-0.1) {
            let fit = fit_power_law(|n| c * (n as f64).powf(s), (5, 5000)).unwrap();
            prop_assert!((fit.slope - s).abs() < 1e-10);
        }
    }
}
