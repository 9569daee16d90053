//! Orbit and ensemble experiments: occupation fractions, pushforwards of
//! absolutely continuous measures, Cesàro means, correlations and coverage
//! of the simplex by occupation vectors.

use rand::distr::{Distribution, Open01};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::arcsine::{ks_statistic, lamperti_cdf, SimplexPoint};
use crate::error::{Error, Result};
use crate::induced::{CellTable, InducingSet, Region};
use crate::map::IntervalMap;

/// Largest share of flagged orbits an ensemble tolerates.
pub const FLAG_LIMIT: f64 = 0.01;

/// Random stream of trajectory `index` under `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `f(0), ..., f(count - 1)` evaluated in parallel and returned in index order.
pub fn par_indexed<T, F>(count: u64, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let run = || (0..count).into_par_iter().map(&f).collect::<Vec<T>>();
    match workers {
        None => Ok(run()),
        Some(0) => Err(Error::InvalidParameter("worker count must be positive".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
            .map(|pool| pool.install(run)),
    }
}

/// Absolutely continuous initial measure on the phase interval. `Beta` and
/// `Histogram` coordinates are affine images of `[0, 1]` and absolute
/// positions respectively.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialDensity {
    Uniform,
    Beta { a: f64, b: f64 },
    Histogram { edges: Vec<f64>, weights: Vec<f64> },
}

impl InitialDensity {
    pub fn tag(&self) -> String {
        match self {
            InitialDensity::Uniform => "uniform".into(),
            InitialDensity::Beta { a, b } => format!("beta({a},{b})"),
            InitialDensity::Histogram { edges, .. } => format!("histogram({} cells)", edges.len().saturating_sub(1)),
        }
    }

    pub fn sampler(&self, map: &IntervalMap) -> Result<Sampler> {
        let kind = match self {
            InitialDensity::Uniform => SamplerKind::Uniform,
            InitialDensity::Beta { a, b } => SamplerKind::Beta(
                Beta::new(*a, *b).map_err(|e| Error::InvalidParameter(format!("beta({a}, {b}): {e}")))?,
            ),
            InitialDensity::Histogram { edges, weights } => {
                if edges.len() < 2 || weights.len() + 1 != edges.len() {
                    return Err(Error::InvalidParameter(
                        "histogram needs n + 1 edges for n weights".into(),
                    ));
                }
                if edges.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidParameter("histogram edges must increase".into()));
                }
                if edges[0] < map.domain.0 || *edges.last().unwrap() > map.domain.1 {
                    return Err(Error::InvalidParameter("histogram leaves the phase interval".into()));
                }
                if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
                    return Err(Error::InvalidParameter("histogram weights must be nonnegative".into()));
                }
                let total: f64 = weights.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::InvalidParameter("histogram has no mass".into()));
                }
                let cumulative = weights
                    .iter()
                    .scan(0.0, |acc, w| {
                        *acc += w / total;
                        Some(*acc)
                    })
                    .collect();
                SamplerKind::Histogram {
                    edges: edges.clone(),
                    cumulative,
                }
            }
        };
        Ok(Sampler {
            kind,
            domain: map.domain,
        })
    }
}

#[derive(Clone, Debug)]
enum SamplerKind {
    Uniform,
    Beta(Beta),
    Histogram { edges: Vec<f64>, cumulative: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct Sampler {
    kind: SamplerKind,
    domain: (f64, f64),
}

impl Sampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = Open01.sample(rng);
        let (a, b) = self.domain;
        match &self.kind {
            SamplerKind::Uniform => a + (b - a) * u,
            SamplerKind::Beta(beta) => a + (b - a) * beta.inverse_cdf(u),
            SamplerKind::Histogram { edges, cumulative } => {
                let i = cumulative.partition_point(|&c| c < u).min(cumulative.len() - 1);
                let v: f64 = Open01.sample(rng);
                edges[i] + (edges[i + 1] - edges[i]) * v
            }
        }
    }
}

/// Neighbourhoods `B_eps(xi_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Balls {
    pub centers: Vec<f64>,
    pub eps: f64,
}

impl Balls {
    pub fn new(map: &IntervalMap, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps = {eps} must be positive")));
        }
        let centers = map.positions();
        if centers.windows(2).any(|w| w[1] - w[0] <= 2.0 * eps) {
            return Err(Error::OverlappingNeighbourhoods { eps });
        }
        Ok(Self { centers, eps })
    }

    #[inline]
    pub fn which(&self, x: f64) -> Option<usize> {
        self.centers.iter().position(|&c| (x - c).abs() < self.eps)
    }
}

/// How orbits are advanced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepping {
    /// One application of the map per step.
    #[default]
    Direct,
    /// Neutral excursions are crossed in one jump using the cell table; the
    /// in-cell position is carried as a fraction, so step counts are exact
    /// but positions inside an excursion are interpolated.
    Skip,
}

/// Per-orbit result of [`Engine::run`].
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitRecord {
    /// Visits of `x_0, ..., x_{n-1}` to each neighbourhood.
    pub counts: Vec<u64>,
    /// `x_t` at each requested checkpoint `t`.
    pub checkpoints: Vec<f64>,
    pub end: f64,
    pub flagged: bool,
}

/// Orbit driver shared by the experiments.
pub struct Engine<'a> {
    pub map: &'a IntervalMap,
    pub cells: Option<&'a CellTable>,
    pub inducing: InducingSet,
    pub balls: Balls,
}

impl<'a> Engine<'a> {
    pub fn direct(map: &'a IntervalMap, eps: f64) -> Result<Self> {
        Ok(Self {
            map,
            cells: None,
            inducing: InducingSet::build(map)?,
            balls: Balls::new(map, eps)?,
        })
    }

    pub fn skip(map: &'a IntervalMap, cells: &'a CellTable, eps: f64) -> Result<Self> {
        Ok(Self {
            map,
            cells: Some(cells),
            inducing: cells.inducing.clone(),
            balls: Balls::new(map, eps)?,
        })
    }

    pub fn new(map: &'a IntervalMap, cells: Option<&'a CellTable>, stepping: Stepping, eps: f64) -> Result<Self> {
        match (stepping, cells) {
            (Stepping::Direct, _) => Self::direct(map, eps),
            (Stepping::Skip, Some(c)) => Self::skip(map, c, eps),
            (Stepping::Skip, None) => Err(Error::InvalidParameter("skip stepping needs a cell table".into())),
        }
    }

    pub fn stepping(&self) -> Stepping {
        if self.cells.is_some() {
            Stepping::Skip
        } else {
            Stepping::Direct
        }
    }

    fn flag(&self, x: f64) -> bool {
        self.map.apply(x) == x && self.map.fixed_point_at(x).is_none()
    }

    /// Runs `n` steps from `x0`, recording `x_t` for each `t` in the sorted
    /// list `checkpoints` (all `<= n`).
    pub fn run(&self, x0: f64, n: u64, checkpoints: &[u64]) -> OrbitRecord {
        match self.cells {
            None => self.run_direct(x0, n, checkpoints),
            Some(c) => self.run_skip(c, x0, n, checkpoints),
        }
    }

    fn run_direct(&self, x0: f64, n: u64, checkpoints: &[u64]) -> OrbitRecord {
        let mut counts = vec![0u64; self.balls.centers.len()];
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut ci = 0;
        let mut x = x0;
        for t in 0..n {
            while ci < checkpoints.len() && checkpoints[ci] == t {
                out.push(x);
                ci += 1;
            }
            if let Some(k) = self.balls.which(x) {
                counts[k] += 1;
            }
            x = self.map.apply(x);
        }
        while ci < checkpoints.len() {
            out.push(x);
            ci += 1;
        }
        OrbitRecord {
            counts,
            checkpoints: out,
            end: x,
            flagged: self.flag(x),
        }
    }

    fn run_skip(&self, cells: &CellTable, x0: f64, n: u64, checkpoints: &[u64]) -> OrbitRecord {
        let mut counts = vec![0u64; self.balls.centers.len()];
        let mut out = Vec::with_capacity(checkpoints.len());
        let mut ci = 0;
        let mut x = x0;
        let mut t = 0u64;
        let mut stuck = false;
        while t < n {
            if let Region::Gap(k) = self.inducing.region(x) {
                if x == self.balls.centers[k] {
                    counts[k] += n - t;
                    stuck = x != x0;
                    break;
                }
                if let Some(ei) = cells.excursion_at(k, x) {
                    let e = &cells.excursions[ei];
                    let pos = e.locate((x - e.xi).abs());
                    let m = pos.depth;
                    if m >= 2 {
                        // Positions at depths m, m-1, ..., m-len+1 are visited at times t, ..., t+len-1.
                        let len = (m - 1).min(n - t);
                        let r = pos.fraction;
                        let j = e.first_depth_within(r, self.balls.eps);
                        let low = m + 1 - len;
                        if m >= j {
                            counts[k] += m - j.max(low) + 1;
                        }
                        while ci < checkpoints.len() && checkpoints[ci] < t + len {
                            let depth = m - (checkpoints[ci] - t);
                            out.push(e.position(e.dist_at(depth, r)));
                            ci += 1;
                        }
                        x = e.position(e.dist_at(m - len, r));
                        t += len;
                        continue;
                    }
                }
            }
            while ci < checkpoints.len() && checkpoints[ci] == t {
                out.push(x);
                ci += 1;
            }
            if let Some(k) = self.balls.which(x) {
                counts[k] += 1;
            }
            x = self.map.apply(x);
            t += 1;
        }
        while ci < checkpoints.len() {
            out.push(x);
            ci += 1;
        }
        // Deep positions with f(x) == x in floating point are crossed by the
        // jump, so only a landing exactly on a fixed point is flagged.
        OrbitRecord {
            counts,
            checkpoints: out,
            end: x,
            flagged: stuck,
        }
    }
}

fn check_flags(flagged: usize, total: usize) -> Result<()> {
    if total > 0 && flagged as f64 > FLAG_LIMIT * total as f64 {
        return Err(Error::TooManyFlagged { flagged, total });
    }
    Ok(())
}

/// Occupation vector `S_n / n` of one orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationSample {
    pub index: u64,
    pub x0: f64,
    pub fractions: Vec<f64>,
    /// Share of time outside every neighbourhood.
    pub leftover: f64,
    pub flagged: bool,
}

impl OccupationSample {
    fn from_record(index: u64, x0: f64, n: u64, rec: &OrbitRecord) -> Self {
        let fractions: Vec<f64> = rec.counts.iter().map(|&c| c as f64 / n as f64).collect();
        let inside: u64 = rec.counts.iter().sum();
        Self {
            index,
            x0,
            fractions,
            leftover: (n - inside) as f64 / n as f64,
            flagged: rec.flagged,
        }
    }
}

/// `S_n^k / n` along the orbit of `x0` by direct iteration.
pub fn occupation_fractions(map: &IntervalMap, x0: f64, n: u64, eps: f64) -> Result<OccupationSample> {
    map.check_domain(x0)?;
    if n == 0 {
        return Err(Error::InvalidParameter("orbit length must be positive".into()));
    }
    let engine = Engine::direct(map, eps)?;
    let rec = engine.run(x0, n, &[]);
    Ok(OccupationSample::from_record(0, x0, n, &rec))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Number of orbits.
    pub orbits: u64,
    /// Orbit length.
    pub n: u64,
    pub eps: f64,
    pub seed: u64,
    pub lambda: InitialDensity,
    #[serde(default)]
    pub stepping: Stepping,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationEnsemble {
    pub map: String,
    pub n: u64,
    pub eps: f64,
    pub lambda: String,
    pub seed: u64,
    pub stepping: Stepping,
    pub samples: Vec<OccupationSample>,
    pub flagged: usize,
}

impl OccupationEnsemble {
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.fractions[k]).collect()
    }

    /// Ensemble means of each component and their standard errors.
    pub fn mean(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.samples.first().map_or(0, |s| s.fractions.len());
        (0..d).map(|k| mean_se(&self.component(k))).unzip()
    }

    pub fn mean_leftover(&self) -> f64 {
        self.samples.iter().map(|s| s.leftover).sum::<f64>() / self.samples.len() as f64
    }

    /// KS distance of the first component to the law with parameters `(alpha, p)`.
    pub fn ks_lamperti(&self, alpha: f64, p: f64) -> Result<f64> {
        let xs = self.component(0);
        if alpha == 1.0 {
            return Ok(ks_statistic(&xs, |t| if t < p { 0.0 } else { 1.0 }));
        }
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let cdf = xs
            .iter()
            .map(|&t| lamperti_cdf(alpha, p, t.clamp(0.0, 1.0)))
            .collect::<Result<Vec<f64>>>()?;
        // The sample is sorted, so the cdf can be looked up by rank.
        let n = xs.len() as f64;
        Ok(cdf
            .iter()
            .enumerate()
            .map(|(i, &f)| (f - i as f64 / n).max((i + 1) as f64 / n - f))
            .fold(0.0, f64::max))
    }

    /// Share of samples within `r` (sup norm) of `p`.
    pub fn concentration(&self, p: &SimplexPoint, r: f64) -> f64 {
        let hits = self
            .samples
            .iter()
            .filter(|s| s.fractions.iter().zip(p.as_slice()).all(|(a, b)| (a - b).abs() <= r))
            .count();
        hits as f64 / self.samples.len() as f64
    }
}

pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

pub fn occupation_ensemble(
    engine: &Engine,
    cfg: &EnsembleConfig,
    workers: Option<usize>,
) -> Result<OccupationEnsemble> {
    if cfg.orbits == 0 || cfg.n == 0 {
        return Err(Error::InvalidParameter("ensemble size and orbit length must be positive".into()));
    }
    if (cfg.eps - engine.balls.eps).abs() > 0.0 {
        return Err(Error::InvalidParameter("engine and config disagree on eps".into()));
    }
    let sampler = cfg.lambda.sampler(engine.map)?;
    let samples = par_indexed(cfg.orbits, workers, |i| {
        let mut rng = trajectory_rng(cfg.seed, i);
        let x0 = sampler.sample(&mut rng);
        let rec = engine.run(x0, cfg.n, &[]);
        OccupationSample::from_record(i, x0, cfg.n, &rec)
    })?;
    let flagged = samples.iter().filter(|s| s.flagged).count();
    check_flags(flagged, samples.len())?;
    Ok(OccupationEnsemble {
        map: engine.map.describe(),
        n: cfg.n,
        eps: cfg.eps,
        lambda: cfg.lambda.tag(),
        seed: cfg.seed,
        stepping: engine.stepping(),
        samples,
        flagged,
    })
}

/// Bins over the phase interval: 64 geometric bins (ratio 1.5) on each side
/// of every fixed point inside its neighbourhood, and 128 uniform bins over
/// the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub edges: Vec<f64>,
}

pub const GEOMETRIC_BINS: usize = 64;
pub const GEOMETRIC_RATIO: f64 = 1.5;
pub const UNIFORM_BINS: usize = 128;

impl Binning {
    pub fn new(map: &IntervalMap, eps: f64) -> Result<Self> {
        let balls = Balls::new(map, eps)?;
        let (a, b) = map.domain;
        let mut edges = vec![a, b];
        for fp in &map.fixed_points {
            edges.push(fp.position);
            for s in fp.sides(map.domain) {
                for i in 0..GEOMETRIC_BINS {
                    edges.push(fp.position + s * eps * GEOMETRIC_RATIO.powi(-(i as i32)));
                }
            }
        }
        // Gaps outside all neighbourhoods.
        let mut gaps = Vec::new();
        let mut lo = a;
        for &c in &balls.centers {
            let hi = (c - eps).max(a);
            if hi > lo {
                gaps.push((lo, hi));
            }
            lo = (c + eps).min(b);
        }
        if b > lo {
            gaps.push((lo, b));
        }
        let total: f64 = gaps.iter().map(|g| g.1 - g.0).sum();
        let shares: Vec<f64> = gaps
            .iter()
            .map(|g| UNIFORM_BINS as f64 * (g.1 - g.0) / total)
            .collect();
        let mut alloc: Vec<usize> = shares.iter().map(|s| (s.floor() as usize).max(1)).collect();
        let mut order: Vec<usize> = (0..gaps.len()).collect();
        order.sort_by(|&i, &j| (shares[j] - shares[j].floor()).total_cmp(&(shares[i] - shares[i].floor())));
        let mut k = 0;
        while alloc.iter().sum::<usize>() < UNIFORM_BINS && !order.is_empty() {
            alloc[order[k % order.len()]] += 1;
            k += 1;
        }
        for (g, &m) in gaps.iter().zip(&alloc) {
            for i in 1..m {
                edges.push(g.0 + (g.1 - g.0) * i as f64 / m as f64);
            }
            edges.push(g.0);
            edges.push(g.1);
        }
        edges.retain(|&e| e >= a && e <= b);
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        Ok(Self { edges })
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn bin(&self, x: f64) -> usize {
        self.edges.partition_point(|&e| e <= x).clamp(1, self.len()) - 1
    }
}

/// Histogram of a probability measure on the phase interval with its masses
/// near the fixed points and W1 distances to measures on the fixed points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSummary {
    /// `(left, right, mass)` per bin.
    pub bins: Vec<(f64, f64, f64)>,
    /// Mass in `B_eps(xi_k)`, by the same membership test as the occupation counts.
    pub ball_masses: Vec<f64>,
    pub samples: u64,
    /// W1 distance to `sum_k p_k delta_{xi_k}` for the supplied weights.
    pub w1_to_reference: Option<f64>,
    /// Minimizer of the W1 distance over the simplex grid, and the minimum.
    pub w1_best_p: Vec<f64>,
    pub w1_best: f64,
}

/// Exact W1 distance between a histogram (uniform within bins) and a
/// discrete measure `atoms = [(position, weight)]`.
pub fn w1_to_atoms(bins: &[(f64, f64, f64)], atoms: &[(f64, f64)]) -> f64 {
    let mut atoms = atoms.to_vec();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut f_mu = 0.0;
    let mut total = 0.0;
    let mut ai = 0;
    let mut f_nu = 0.0;
    for &(l, r, m) in bins {
        let slope = if r > l { m / (r - l) } else { 0.0 };
        let mut x = l;
        loop {
            while ai < atoms.len() && atoms[ai].0 <= x {
                f_nu += atoms[ai].1;
                ai += 1;
            }
            let next = if ai < atoms.len() && atoms[ai].0 < r { atoms[ai].0 } else { r };
            let g0 = f_mu + slope * (x - l) - f_nu;
            let g1 = f_mu + slope * (next - l) - f_nu;
            total += abs_linear_integral(g0, g1, next - x);
            if next >= r {
                break;
            }
            x = next;
        }
        f_mu += m;
    }
    total
}

/// `int_0^w |g|` for `g` linear from `g0` to `g1`.
fn abs_linear_integral(g0: f64, g1: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    if g0 * g1 >= 0.0 {
        0.5 * w * (g0.abs() + g1.abs())
    } else {
        0.5 * w * (g0 * g0 + g1 * g1) / (g0.abs() + g1.abs())
    }
}

/// Points of the simplex with coordinates in `{0, 1/m, ..., 1}`.
pub fn simplex_grid(d: usize, m: usize) -> Vec<Vec<f64>> {
    fn rec(d: usize, left: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if d == 1 {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / m as f64).collect());
            cur.pop();
            return;
        }
        for i in 0..=left {
            cur.push(i);
            rec(d - 1, left - i, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, m, m, &mut Vec::new(), &mut out);
    out
}

fn grid_resolution(d: usize) -> usize {
    match d {
        2 => 100,
        3 => 50,
        _ => 12,
    }
}

impl MeasureSummary {
    pub fn from_counts(
        map: &IntervalMap,
        binning: &Binning,
        counts: &[u64],
        ball_counts: &[u64],
        samples: u64,
        reference: Option<&SimplexPoint>,
    ) -> Self {
        let total = samples as f64;
        let bins: Vec<(f64, f64, f64)> = binning
            .edges
            .windows(2)
            .zip(counts)
            .map(|(e, &c)| (e[0], e[1], c as f64 / total))
            .collect();
        let xs = map.positions();
        let w1 = |p: &[f64]| {
            let atoms: Vec<(f64, f64)> = xs.iter().cloned().zip(p.iter().cloned()).collect();
            w1_to_atoms(&bins, &atoms)
        };
        let mut best = f64::INFINITY;
        let mut best_p = Vec::new();
        for p in simplex_grid(map.d(), grid_resolution(map.d())) {
            let v = w1(&p);
            if v < best {
                best = v;
                best_p = p;
            }
        }
        Self {
            w1_to_reference: reference.map(|p| w1(p.as_slice())),
            ball_masses: ball_counts.iter().map(|&c| c as f64 / total).collect(),
            bins,
            samples,
            w1_best_p: best_p,
            w1_best: best,
        }
    }

    pub fn from_points(
        map: &IntervalMap,
        binning: &Binning,
        balls: &Balls,
        xs: &[f64],
        reference: Option<&SimplexPoint>,
    ) -> Self {
        let mut counts = vec![0u64; binning.len()];
        let mut ball = vec![0u64; balls.centers.len()];
        for &x in xs {
            counts[binning.bin(x)] += 1;
            if let Some(k) = balls.which(x) {
                ball[k] += 1;
            }
        }
        Self::from_counts(map, binning, &counts, &ball, xs.len() as u64, reference)
    }

    pub fn total_mass(&self) -> f64 {
        self.bins.iter().map(|b| b.2).sum()
    }
}

/// Empirical measure `e_n(x0)` of one orbit (direct iteration).
pub fn empirical_measure(
    map: &IntervalMap,
    x0: f64,
    n: u64,
    eps: f64,
    reference: Option<&SimplexPoint>,
) -> Result<(MeasureSummary, bool)> {
    map.check_domain(x0)?;
    if n == 0 {
        return Err(Error::InvalidParameter("orbit length must be positive".into()));
    }
    let binning = Binning::new(map, eps)?;
    let balls = Balls::new(map, eps)?;
    let mut counts = vec![0u64; binning.len()];
    let mut ball = vec![0u64; balls.centers.len()];
    let mut x = x0;
    for _ in 0..n {
        counts[binning.bin(x)] += 1;
        if let Some(k) = balls.which(x) {
            ball[k] += 1;
        }
        x = map.apply(x);
    }
    let flagged = map.apply(x) == x && map.fixed_point_at(x).is_none();
    Ok((
        MeasureSummary::from_counts(map, &binning, &counts, &ball, n, reference),
        flagged,
    ))
}

/// `f^n_* lambda` at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushforwardPoint {
    pub n: u64,
    pub summary: MeasureSummary,
    /// Standard errors of `summary.ball_masses`.
    pub ball_se: Vec<f64>,
    /// Mass on the inducing set and its standard error.
    pub y_mass: f64,
    pub y_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushforwardReport {
    pub map: String,
    pub lambda: String,
    pub orbits: u64,
    pub seed: u64,
    pub eps: f64,
    pub stepping: Stepping,
    pub points: Vec<PushforwardPoint>,
    pub flagged: usize,
}

fn proportion_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Positions `x_n`, for each `n` in `n_list`, of `orbits` points drawn from `lambda`.
pub fn pushforward_positions(
    engine: &Engine,
    lambda: &InitialDensity,
    n_list: &[u64],
    orbits: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, usize)> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("n_list must be nonempty and increasing".into()));
    }
    if orbits == 0 {
        return Err(Error::InvalidParameter("ensemble size must be positive".into()));
    }
    let sampler = lambda.sampler(engine.map)?;
    let n_max = *n_list.last().unwrap();
    let recs = par_indexed(orbits, workers, |i| {
        let mut rng = trajectory_rng(seed, i);
        let x0 = sampler.sample(&mut rng);
        let rec = engine.run(x0, n_max, n_list);
        (x0, rec.checkpoints, rec.flagged)
    })?;
    let flagged = recs.iter().filter(|r| r.2).count();
    check_flags(flagged, recs.len())?;
    let starts = recs.iter().map(|r| r.0).collect();
    let at = (0..n_list.len())
        .map(|j| recs.iter().map(|r| r.1[j]).collect())
        .collect();
    Ok((starts, at, flagged))
}

pub fn pushforward(
    engine: &Engine,
    lambda: &InitialDensity,
    n_list: &[u64],
    orbits: u64,
    seed: u64,
    reference: Option<&SimplexPoint>,
    workers: Option<usize>,
) -> Result<PushforwardReport> {
    let (_, at, flagged) = pushforward_positions(engine, lambda, n_list, orbits, seed, workers)?;
    let binning = Binning::new(engine.map, engine.balls.eps)?;
    let points = n_list
        .iter()
        .zip(&at)
        .map(|(&n, xs)| {
            let summary = MeasureSummary::from_points(engine.map, &binning, &engine.balls, xs, reference);
            let in_y = xs.iter().filter(|&&x| engine.inducing.contains(x)).count();
            let y_mass = in_y as f64 / orbits as f64;
            PushforwardPoint {
                n,
                ball_se: summary.ball_masses.iter().map(|&m| proportion_se(m, orbits)).collect(),
                y_mass,
                y_se: proportion_se(y_mass, orbits),
                summary,
            }
        })
        .collect();
    Ok(PushforwardReport {
        map: engine.map.describe(),
        lambda: lambda.tag(),
        orbits,
        seed,
        eps: engine.balls.eps,
        stepping: engine.stepping(),
        points,
        flagged,
    })
}

/// Start points of an ensemble, for callers that want to drive orbits themselves.
pub fn ensemble_starts(map: &IntervalMap, lambda: &InitialDensity, orbits: u64, seed: u64) -> Result<Vec<f64>> {
    let sampler = lambda.sampler(map)?;
    Ok((0..orbits)
        .map(|i| sampler.sample(&mut trajectory_rng(seed, i)))
        .collect())
}

/// Cesàro mean `(1/n) sum_{j<n} f^j_* lambda` over `orbits` sample points,
/// by direct iteration. Returns the summary and the integer bin counts.
pub fn cesaro_pushforward(
    map: &IntervalMap,
    lambda: &InitialDensity,
    n: u64,
    eps: f64,
    orbits: u64,
    seed: u64,
    reference: Option<&SimplexPoint>,
    workers: Option<usize>,
) -> Result<(MeasureSummary, Vec<u64>)> {
    if n == 0 || orbits == 0 {
        return Err(Error::InvalidParameter("orbit length and ensemble size must be positive".into()));
    }
    let binning = Binning::new(map, eps)?;
    let balls = Balls::new(map, eps)?;
    let sampler = lambda.sampler(map)?;
    let per_orbit = par_indexed(orbits, workers, |i| {
        let mut rng = trajectory_rng(seed, i);
        let mut x = sampler.sample(&mut rng);
        let mut counts = vec![0u64; binning.len()];
        let mut ball = vec![0u64; balls.centers.len()];
        for _ in 0..n {
            counts[binning.bin(x)] += 1;
            if let Some(k) = balls.which(x) {
                ball[k] += 1;
            }
            x = map.apply(x);
        }
        let flagged = map.apply(x) == x && map.fixed_point_at(x).is_none();
        (counts, ball, flagged)
    })?;
    let flagged = per_orbit.iter().filter(|r| r.2).count();
    check_flags(flagged, per_orbit.len())?;
    let mut counts = vec![0u64; binning.len()];
    let mut ball = vec![0u64; balls.centers.len()];
    for (c, b, _) in &per_orbit {
        counts.iter_mut().zip(c).for_each(|(a, v)| *a += v);
        ball.iter_mut().zip(b).for_each(|(a, v)| *a += v);
    }
    let summary = MeasureSummary::from_counts(map, &binning, &counts, &ball, n * orbits, reference);
    Ok((summary, counts))
}

/// Test functions for correlations; coordinates are absolute positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Observable {
    One,
    Identity,
    /// `x` minus the midpoint of the phase interval.
    Centered,
    /// `sum_i coeffs[i] x^i`.
    Poly { coeffs: Vec<f64> },
    Indicator { lo: f64, hi: f64 },
}

impl Observable {
    pub fn eval(&self, x: f64, domain: (f64, f64)) -> f64 {
        match self {
            Observable::One => 1.0,
            Observable::Identity => x,
            Observable::Centered => x - 0.5 * (domain.0 + domain.1),
            Observable::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Observable::Indicator { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Rejects observables with a jump at a fixed point.
    pub fn check_continuous_at(&self, points: &[f64]) -> Result<()> {
        if let Observable::Indicator { lo, hi } = self {
            if let Some(&xi) = points.iter().find(|&&xi| xi == *lo || xi == *hi) {
                return Err(Error::DiscontinuousObservable { xi });
            }
        }
        Ok(())
    }

    /// Average over the phase interval (normalized Lebesgue measure).
    pub fn mean(&self, domain: (f64, f64)) -> f64 {
        average(|x| self.eval(x, domain), domain)
    }
}

/// Average of a piecewise-smooth function over `domain`.
fn average<F: Fn(f64) -> f64>(f: F, domain: (f64, f64)) -> f64 {
    let (a, b) = domain;
    quadrature::double_exponential::integrate(&f, a, b, 1e-12).integral / (b - a)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub n: u64,
    pub estimate: f64,
    pub se: f64,
    /// `int psi dLeb * sum_k p_k phi(xi_k)`.
    pub limit: f64,
    /// `int psi phi dLeb`, reported for `n = 0`.
    pub direct: Option<f64>,
}

/// `int psi * phi o f^n dLeb` (normalized Lebesgue) by sampling.
pub fn correlation(
    engine: &Engine,
    psi: &Observable,
    phi: &Observable,
    n_list: &[u64],
    orbits: u64,
    seed: u64,
    p_bar: &SimplexPoint,
    workers: Option<usize>,
) -> Result<Vec<CorrelationPoint>> {
    let map = engine.map;
    let xs = map.positions();
    phi.check_continuous_at(&xs)?;
    if p_bar.len() != map.d() {
        return Err(Error::InvalidParameter("weights and fixed points differ in number".into()));
    }
    let (starts, at, _) =
        pushforward_positions(engine, &InitialDensity::Uniform, n_list, orbits, seed, workers)?;
    let dom = map.domain;
    let psi_mean = psi.mean(dom);
    let limit = psi_mean * xs.iter().zip(p_bar.as_slice()).map(|(&x, &p)| p * phi.eval(x, dom)).sum::<f64>();
    Ok(n_list
        .iter()
        .zip(&at)
        .map(|(&n, pos)| {
            let vals: Vec<f64> = starts
                .iter()
                .zip(pos)
                .map(|(&x0, &x)| psi.eval(x0, dom) * phi.eval(x, dom))
                .collect();
            let (estimate, se) = mean_se(&vals);
            let direct = (n == 0).then(|| average(|x| psi.eval(x, dom) * phi.eval(x, dom), dom));
            CorrelationPoint {
                n,
                estimate,
                se,
                limit,
                direct,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub n_max: u64,
    /// Spacing of the net on the simplex.
    pub delta: f64,
    pub eps: f64,
    /// Steps ignored before occupation vectors are recorded.
    #[serde(default = "default_burn_in")]
    pub burn_in: u64,
}

fn default_burn_in() -> u64 {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub x0: f64,
    pub n_max: u64,
    pub delta: f64,
    pub net_points: usize,
    /// Largest sup-norm distance from a net point to the recorded occupation vectors.
    pub covering_radius: f64,
    /// Closest sup-norm approach to each vertex.
    pub vertex_approach: Vec<f64>,
    /// Covering radius after each power of ten.
    pub history: Vec<(u64, f64)>,
    pub flagged: bool,
    /// Outside the range where full coverage is proved.
    pub alpha_one: bool,
}

/// Tracks `p_n = S_n / n` along one orbit and measures how well the visited
/// set covers a `delta`-net of the simplex. Occupation vectors are sampled
/// at gaps of at most `n * 1e-5` steps, which moves them by at most `2e-5`.
pub fn simplex_coverage(map: &IntervalMap, x0: f64, cfg: &CoverageConfig) -> Result<CoverageReport> {
    map.check_domain(x0)?;
    if !(cfg.delta > 0.0 && cfg.delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("net spacing {} outside (0, 1]", cfg.delta)));
    }
    if cfg.n_max <= cfg.burn_in {
        return Err(Error::InvalidParameter("n_max must exceed the burn-in".into()));
    }
    let balls = Balls::new(map, cfg.eps)?;
    let d = map.d();
    let m = (1.0 / cfg.delta).round() as usize;
    let net = simplex_grid(d, m);
    let mut closest = vec![f64::INFINITY; net.len()];
    let mut vertex = vec![f64::INFINITY; d];
    let mut counts = vec![0u64; d];
    let mut history = Vec::new();
    let mut next_decade = 10u64;
    let mut next_eval = cfg.burn_in.max(1);
    let mut p = vec![0.0; d];
    let mut x = x0;
    let radius = |closest: &[f64]| closest.iter().cloned().fold(0.0, f64::max);
    for t in 1..=cfg.n_max {
        if let Some(k) = balls.which(x) {
            counts[k] += 1;
        }
        x = map.apply(x);
        if t >= next_eval || t == cfg.n_max {
            let inv = 1.0 / t as f64;
            p.iter_mut().zip(&counts).for_each(|(a, &c)| *a = c as f64 * inv);
            for (q, c) in net.iter().zip(closest.iter_mut()) {
                let dist = q.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                *c = c.min(dist);
            }
            for (k, v) in vertex.iter_mut().enumerate() {
                let dist = p
                    .iter()
                    .enumerate()
                    .map(|(j, &pj)| (pj - if j == k { 1.0 } else { 0.0 }).abs())
                    .fold(0.0, f64::max);
                *v = v.min(dist);
            }
            next_eval = t + ((t as f64 * 1e-5) as u64).max(1);
        }
        if t == next_decade {
            if t >= cfg.burn_in {
                history.push((t, radius(&closest)));
            }
            next_decade = next_decade.saturating_mul(10);
        }
    }
    if history.last().map(|h| h.0) != Some(cfg.n_max) {
        history.push((cfg.n_max, radius(&closest)));
    }
    Ok(CoverageReport {
        x0,
        n_max: cfg.n_max,
        delta: cfg.delta,
        net_points: net.len(),
        covering_radius: radius(&closest),
        vertex_approach: vertex,
        history,
        flagged: map.apply(x) == x && map.fixed_point_at(x).is_none(),
        alpha_one: map.alpha >= 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{build_clm_map, build_thaler_map};

    fn sym() -> IntervalMap {
        build_thaler_map(0.5, &[0.5], None).unwrap()
    }

    #[test]
    fn fixed_point_orbit_stays_put() {
        let m = sym();
        for n in [1, 10, 1000] {
            let s = occupation_fractions(&m, 0.0, n, 0.05).unwrap();
            assert_eq!(s.fractions, vec![1.0, 0.0]);
            assert!(!s.flagged);
            let s = occupation_fractions(&m, 1.0, n, 0.05).unwrap();
            assert_eq!(s.fractions, vec![0.0, 1.0]);
        }
        let (e, _) = empirical_measure(&m, 0.0, 1000, 0.05, None).unwrap();
        assert_eq!(e.ball_masses, vec![1.0, 0.0]);
        assert!(e.w1_best < 1e-12);
        assert_eq!(e.w1_best_p, vec![1.0, 0.0]);
    }

    #[test]
    fn overlapping_neighbourhoods_are_rejected() {
        let m = sym();
        assert!(matches!(Balls::new(&m, 0.6), Err(Error::OverlappingNeighbourhoods { .. })));
        assert!(Balls::new(&m, 0.0).is_err());
    }

    #[test]
    fn mirrored_orbits_swap_components() {
        // The mirror image of x + 4x^3 is the right branch exactly, so orbits mirror.
        let m = sym();
        for &x0 in &[0.123, 0.3, 0.77] {
            // Float orbits separate under the expansion, so compare a short horizon.
            let a = occupation_fractions(&m, x0, 25, 0.05).unwrap();
            let b = occupation_fractions(&m, 1.0 - x0, 25, 0.05).unwrap();
            assert_eq!(a.fractions[0], b.fractions[1], "{a:?} {b:?}");
            assert_eq!(a.fractions[1], b.fractions[0]);
        }
    }

    #[test]
    fn empirical_measure_matches_occupation_counts() {
        let m = build_thaler_map(0.5, &[0.4], None).unwrap();
        let (e, _) = empirical_measure(&m, 0.3141, 100_000, 0.05, None).unwrap();
        let s = occupation_fractions(&m, 0.3141, 100_000, 0.05).unwrap();
        assert_eq!(e.ball_masses, s.fractions);
        assert!((e.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binning_partitions_the_interval() {
        for m in [sym(), build_clm_map(2.0).unwrap(), build_thaler_map(0.5, &[0.3, 0.7], None).unwrap()] {
            let b = Binning::new(&m, 0.05).unwrap();
            assert_eq!(b.edges[0], m.domain.0);
            assert_eq!(*b.edges.last().unwrap(), m.domain.1);
            assert!(b.edges.windows(2).all(|w| w[1] > w[0]));
            let geometric: usize = m.fixed_points.iter().map(|f| f.sides(m.domain).len()).sum();
            assert_eq!(b.len(), geometric * GEOMETRIC_BINS + UNIFORM_BINS);
        }
    }

    #[test]
    fn w1_of_point_masses() {
        // Half the mass uniform on [0, 0.1], half uniform on [0.9, 1].
        let bins = vec![(0.0, 0.1, 0.5), (0.1, 0.9, 0.0), (0.9, 1.0, 0.5)];
        let w = w1_to_atoms(&bins, &[(0.0, 0.5), (1.0, 0.5)]);
        assert!((w - 0.05).abs() < 1e-14, "{w}");
        let w = w1_to_atoms(&bins, &[(0.0, 1.0), (1.0, 0.0)]);
        assert!((w - (0.5 * 0.05 + 0.5 * 0.95)).abs() < 1e-14, "{w}");
    }

    #[test]
    fn skip_and_direct_agree_in_law() {
        let m = build_thaler_map(0.5, &[0.4], None).unwrap();
        let cells = CellTable::build(&m, 10_000).unwrap();
        let cfg = EnsembleConfig {
            orbits: 2000,
            n: 20_000,
            eps: 0.05,
            seed: 3,
            lambda: InitialDensity::Uniform,
            stepping: Stepping::Direct,
        };
        let d = occupation_ensemble(&Engine::direct(&m, 0.05).unwrap(), &cfg, None).unwrap();
        let s = occupation_ensemble(&Engine::skip(&m, &cells, 0.05).unwrap(), &cfg, None).unwrap();
        let ks = crate::arcsine::ks_two_sample(&d.component(0), &s.component(0));
        assert!(ks < 0.06, "{ks}");
        let (md, sd) = d.mean();
        let (ms, ss) = s.mean();
        assert!((md[0] - ms[0]).abs() < 4.0 * (sd[0].hypot(ss[0])), "{md:?} {ms:?}");
        for x in &s.samples {
            assert!(x.fractions.iter().sum::<f64>() + x.leftover - 1.0 < 1e-12);
            assert!(x.fractions.iter().all(|&f| (0.0..=1.0).contains(&f)));
        }
    }

    #[test]
    fn skip_counts_match_direct_on_single_excursions() {
        // Up to the first return the skip jump reproduces the visit counts
        // (cell-boundary rounding aside) and lands near the true exit.
        let m = build_thaler_map(0.5, &[0.4], None).unwrap();
        let cells = CellTable::build(&m, 10_000).unwrap();
        let direct = Engine::direct(&m, 0.05).unwrap();
        let skip = Engine::skip(&m, &cells, 0.05).unwrap();
        for &x0 in &[0.03, 0.01, 0.97, 0.995] {
            let mut x = x0;
            let mut n = 0;
            while !cells.inducing.contains(x) {
                x = m.apply(x);
                n += 1;
            }
            let a = direct.run(x0, n, &[n / 2, n]);
            let b = skip.run(x0, n, &[n / 2, n]);
            for k in 0..2 {
                assert!((a.counts[k] as i64 - b.counts[k] as i64).abs() <= 1, "{x0}: {a:?} {b:?}");
            }
            assert!((a.end - b.end).abs() < 0.02, "{x0}: {a:?} {b:?}");
            assert!((a.checkpoints[0] - b.checkpoints[0]).abs() < 0.01 * (a.checkpoints[0] - x0.round()).abs());
        }
    }

    #[test]
    fn ensembles_are_independent_of_worker_count() {
        let m = build_thaler_map(0.5, &[0.4], None).unwrap();
        let engine = Engine::direct(&m, 0.05).unwrap();
        let cfg = EnsembleConfig {
            orbits: 64,
            n: 2000,
            eps: 0.05,
            seed: 11,
            lambda: InitialDensity::Beta { a: 2.0, b: 5.0 },
            stepping: Stepping::Direct,
        };
        let a = occupation_ensemble(&engine, &cfg, Some(1)).unwrap();
        let b = occupation_ensemble(&engine, &cfg, Some(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cesaro_counts_are_row_sums_of_per_time_histograms() {
        let m = sym();
        let lambda = InitialDensity::Uniform;
        let (summary, counts) = cesaro_pushforward(&m, &lambda, 50, 0.05, 40, 5, None, None).unwrap();
        let engine = Engine::direct(&m, 0.05).unwrap();
        let times: Vec<u64> = (0..50).collect();
        let (_, at, _) = pushforward_positions(&engine, &lambda, &times, 40, 5, None).unwrap();
        let binning = Binning::new(&m, 0.05).unwrap();
        let mut rows = vec![0u64; binning.len()];
        for xs in &at {
            for &x in xs {
                rows[binning.bin(x)] += 1;
            }
        }
        assert_eq!(rows, counts);
        assert!((summary.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_without_dynamics_is_the_integral() {
        let m = sym();
        let engine = Engine::direct(&m, 0.05).unwrap();
        let p = SimplexPoint::uniform(2);
        let pts = correlation(
            &engine,
            &Observable::Identity,
            &Observable::Poly { coeffs: vec![0.0, 0.0, 1.0] },
            &[0],
            20_000,
            1,
            &p,
            None,
        )
        .unwrap();
        let c = &pts[0];
        assert!((c.direct.unwrap() - 0.25).abs() < 1e-12);
        assert!((c.estimate - 0.25).abs() < 3.0 * c.se, "{c:?}");
        let bad = correlation(
            &engine,
            &Observable::One,
            &Observable::Indicator { lo: 0.0, hi: 0.3 },
            &[0],
            10,
            1,
            &p,
            None,
        );
        assert!(matches!(bad, Err(Error::DiscontinuousObservable { .. })));
    }

    #[test]
    fn coverage_history_is_non_increasing() {
        let m = sym();
        let cfg = CoverageConfig {
            n_max: 200_000,
            delta: 0.1,
            eps: 0.05,
            burn_in: 1000,
        };
        let r = simplex_coverage(&m, 0.2718, &cfg).unwrap();
        assert!(r.history.windows(2).all(|w| w[1].1 <= w[0].1));
        assert_eq!(r.net_points, 11);
        assert_eq!(r.history.last().unwrap().1, r.covering_radius);
    }

    #[test]
    fn samplers_stay_inside_and_follow_their_law() {
        let m = build_clm_map(2.0).unwrap();
        let beta = InitialDensity::Beta { a: 2.0, b: 5.0 }.sampler(&m).unwrap();
        let mut rng = trajectory_rng(1, 0);
        let xs: Vec<f64> = (0..20_000).map(|_| beta.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| x > -1.0 && x < 1.0));
        let b = Beta::new(2.0, 5.0).unwrap();
        let ks = ks_statistic(&xs, |x| b.cdf((x + 1.0) / 2.0));
        assert!(ks < 0.015, "{ks}");
        let h = InitialDensity::Histogram {
            edges: vec![-0.1, 0.0, 0.1],
            weights: vec![0.0, 1.0],
        }
        .sampler(&m)
        .unwrap();
        assert!((0..1000).all(|_| {
            let x = h.sample(&mut rng);
            (0.0..=0.1).contains(&x)
        }));
        assert!(InitialDensity::Histogram {
            edges: vec![0.0, 2.0],
            weights: vec![1.0],
        }
        .sampler(&m)
        .is_err());
    }
}
