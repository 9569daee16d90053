//! The inducing set `Y`, the cell structure of the first-return map and
//! return-time statistics.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{fit_power_law, FitResult};
use crate::error::{Error, Result};
use crate::map::IntervalMap;

/// `Y` as a sorted union of closed components, each split into two pieces at
/// the cut it contains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InducingSet {
    pub components: Vec<(f64, f64)>,
    /// Interior split point of each component.
    pub splits: Vec<f64>,
    /// `pieces[2i]` and `pieces[2i + 1]` are the two halves of component `i`.
    pub pieces: Vec<(f64, f64)>,
}

/// Where a point lies relative to `Y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Piece(usize),
    /// In the gap around the given fixed point.
    Gap(usize),
}

impl InducingSet {
    pub fn build(map: &IntervalMap) -> Result<Self> {
        let mut components = Vec::new();
        let mut splits = Vec::new();
        if map.clm.is_some() {
            let (gm, gp) = period_two(map)?;
            components.push((gm, gp));
            splits.push(0.0);
        } else {
            for (i, &c) in map.cuts.iter().enumerate() {
                let lo = map.branches[i].inverse(c);
                let hi = map.branches[i + 1].inverse(c);
                components.push((lo, hi));
                splits.push(c);
            }
        }
        let pieces = components
            .iter()
            .zip(&splits)
            .flat_map(|(&(a, b), &s)| [(a, s), (s, b)])
            .collect();
        Ok(Self {
            components,
            splits,
            pieces,
        })
    }

    #[inline]
    pub fn region(&self, x: f64) -> Region {
        let i = self.components.partition_point(|c| c.1 < x);
        if i < self.components.len() && x >= self.components[i].0 {
            Region::Piece(2 * i + usize::from(x >= self.splits[i]))
        } else {
            Region::Gap(i)
        }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        matches!(self.region(x), Region::Piece(_))
    }

    pub fn measure(&self) -> f64 {
        self.components.iter().map(|c| c.1 - c.0).sum()
    }

    /// Derivative of the first-return map at `x`, or `None` if the orbit does
    /// not return within `cap` steps.
    pub fn return_derivative(&self, map: &IntervalMap, x: f64, cap: u64) -> Option<f64> {
        let mut x = x;
        let mut d = 1.0;
        for _ in 0..cap {
            d *= map.deriv(x);
            x = map.apply(x);
            if self.contains(x) {
                return Some(d);
            }
        }
        None
    }
}

/// The period-two orbit `gamma_- < 0 < gamma_+` of the two-branch family.
pub fn period_two(map: &IntervalMap) -> Result<(f64, f64)> {
    let minus = &map.branches[0];
    let plus = &map.branches[1];
    let mut lo = minus.inverse(0.0);
    let mut hi = 0.0;
    let phi = |x: f64| plus.eval(minus.eval(x).max(0.0)) - x;
    if !(phi(lo) < 0.0 && phi(-1e-300) > 0.0) {
        return Err(Error::Period2 {
            reason: "no sign change of f+(f-(x)) - x".into(),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gm = 0.5 * (lo + hi);
    let gp = minus.eval(gm);
    if (plus.eval(gp) - gm).abs() > 1e-12 {
        return Err(Error::Period2 {
            reason: format!("f+(gamma+) - gamma- = {:.3e}", plus.eval(gp) - gm),
        });
    }
    Ok((gm, gp))
}

/// Orbits leaving `Y` through one side of a fixed point. `dist[m]` is the
/// distance `D_m` from the fixed point; the cell `X_{k,m}` is
/// `[D_{m+1}, D_m]` for `m >= 1` and `[D_1, D_0]` is the part of `Y` the
/// excursion returns to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    pub fixed_point: usize,
    pub xi: f64,
    pub side: f64,
    pub branch: usize,
    pub dist: Vec<f64>,
    pub b: f64,
    pub p: f64,
}

impl Excursion {
    /// Deepest cell index stored.
    pub fn depth(&self) -> usize {
        self.dist.len() - 2
    }

    pub fn position(&self, dist: f64) -> f64 {
        self.xi + self.side * dist
    }

    /// Absolute endpoints of `X_{k,m}`, sorted.
    pub fn cell(&self, m: usize) -> (f64, f64) {
        let a = self.position(self.dist[m + 1]);
        let b = self.position(self.dist[m]);
        (a.min(b), a.max(b))
    }

    /// Depth `m` and fraction `r` (1 at the far end) of a point at distance
    /// `d <= D_1`. Past the table the depth comes from the leading-order
    /// asymptotics and `beyond` is set.
    pub fn locate(&self, d: f64) -> CellPosition {
        let n = self.depth();
        let tail = &self.dist[1..];
        let c = tail.partition_point(|&v| v >= d);
        if c == 0 {
            return CellPosition {
                depth: 0,
                fraction: 1.0,
                beyond: false,
            };
        }
        if c < tail.len() {
            let m = c;
            let (lo, hi) = (self.dist[m + 1], self.dist[m]);
            CellPosition {
                depth: m as u64,
                fraction: ((d - lo) / (hi - lo)).clamp(0.0, 1.0),
                beyond: false,
            }
        } else {
            let last = self.dist[n + 1];
            let extra = (d.powf(-self.p) - last.powf(-self.p)) / (self.p * self.b);
            let cont = (n + 1) as f64 + extra.max(0.0);
            let m = cont.floor();
            CellPosition {
                depth: (m as u64).max(n as u64 + 1),
                fraction: 1.0 - (cont - m),
                beyond: true,
            }
        }
    }

    /// Distance at depth `i` of a point with in-cell fraction `r`.
    pub fn dist_at(&self, i: u64, r: f64) -> f64 {
        let n = self.depth() as u64;
        if i <= n {
            let (lo, hi) = (self.dist[i as usize + 1], self.dist[i as usize]);
            lo + r * (hi - lo)
        } else {
            let last = self.dist[n as usize + 1];
            let t = last.powf(-self.p) + self.p * self.b * ((i - n - 1) as f64 + 1.0 - r);
            t.powf(-1.0 / self.p)
        }
    }

    /// Smallest depth whose point (at fraction `r`) is within `eps` of the fixed point.
    pub fn first_depth_within(&self, r: f64, eps: f64) -> u64 {
        let n = self.depth() as u64;
        if self.dist_at(1, r) < eps {
            return 1;
        }
        if self.dist_at(n, r) >= eps {
            let last = self.dist[n as usize + 1];
            let need = (eps.powf(-self.p) - last.powf(-self.p)) / (self.p * self.b);
            return n + 1 + need.max(0.0).ceil() as u64;
        }
        let (mut lo, mut hi) = (1u64, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.dist_at(mid, r) < eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellPosition {
    pub depth: u64,
    pub fraction: f64,
    pub beyond: bool,
}

/// Preimages under a non-neutral branch of the cells of one excursion. Cell
/// `m` lies between `P_m` and `P_{m+1}`, and points in it have return time
/// `m + 1`, all but the last step spent near the fixed point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryFamily {
    pub excursion: usize,
    pub branch: usize,
    pub piece: usize,
    pub min_depth: usize,
    /// `g_j(xi_k)`, where the cells accumulate.
    pub accumulation: f64,
    /// `P_m` for `m = min_depth ..= N + 1`.
    pub bounds: Vec<f64>,
    /// Local inverse-branch form `g_j(xi + s D) - accumulation ~ (D / a)^(1/k)`.
    pub local_a: f64,
    pub local_k: f64,
}

impl EntryFamily {
    pub fn bound(&self, m: usize) -> f64 {
        self.bounds[m - self.min_depth]
    }

    pub fn max_depth(&self) -> usize {
        self.min_depth + self.bounds.len() - 2
    }

    /// Endpoints of cell `m`, sorted.
    pub fn cell(&self, m: usize) -> (f64, f64) {
        let a = self.bound(m);
        let b = self.bound(m + 1);
        (a.min(b), a.max(b))
    }

    /// Points with `tau^(k) > n`, i.e. the cells deeper than `n`.
    pub fn beyond(&self, n: usize) -> (f64, f64) {
        let a = self.bound((n + 1).max(self.min_depth));
        (a.min(self.accumulation), a.max(self.accumulation))
    }

    pub fn span(&self) -> (f64, f64) {
        let a = self.bound(self.min_depth);
        (a.min(self.accumulation), a.max(self.accumulation))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellTable {
    pub inducing: InducingSet,
    pub excursions: Vec<Excursion>,
    pub families: Vec<EntryFamily>,
    pub depth: usize,
    /// Set when cells shrank below the floating-point floor before `depth`.
    pub truncated_at: Option<usize>,
}

impl CellTable {
    pub fn build(map: &IntervalMap, depth: usize) -> Result<Self> {
        if depth < 2 {
            return Err(Error::InvalidParameter("cell depth must be at least 2".into()));
        }
        let inducing = InducingSet::build(map)?;
        let clm = map.clm.is_some();
        let mut excursions = Vec::new();
        for (k, fp) in map.fixed_points.iter().enumerate() {
            for s in fp.sides(map.domain) {
                let d0 = if clm {
                    let (gm, gp) = inducing.components[0];
                    if s > 0.0 {
                        gp - fp.position
                    } else {
                        fp.position - gm
                    }
                } else if s > 0.0 {
                    map.cuts[k] - fp.position
                } else {
                    fp.position - map.cuts[k - 1]
                };
                excursions.push(Excursion {
                    fixed_point: k,
                    xi: fp.position,
                    side: s,
                    branch: fp.branch,
                    dist: vec![d0],
                    b: fp.b,
                    p: fp.p,
                });
            }
        }
        let mut truncated_at = None;
        let mut n = depth;
        for e in &mut excursions {
            let br = &map.branches[e.branch];
            e.dist.reserve(depth + 1);
            for m in 0..=depth {
                let d = e.dist[m];
                let next = br.inverse_offset(e.side * d).abs();
                if !(d - next > 1e-300) || !(next > 0.0) {
                    truncated_at = Some(truncated_at.map_or(m, |t: usize| t.min(m)));
                    n = n.min(m.saturating_sub(1));
                    break;
                }
                e.dist.push(next);
            }
        }
        if n < 2 {
            return Err(Error::InsufficientDepth {
                needed: 2,
                have: n,
            });
        }
        for e in &mut excursions {
            e.dist.truncate(n + 2);
        }

        let mut families = Vec::new();
        for (ei, e) in excursions.iter().enumerate() {
            let k = e.fixed_point;
            for (j, br) in map.branches.iter().enumerate() {
                if j == map.fixed_points[k].branch {
                    continue;
                }
                let (piece, min_depth, local_a, local_k) = if let Some(c) = &map.clm {
                    // The point xi = -1 is re-entered from the right branch and vice versa.
                    if e.side > 0.0 {
                        (1, 1, c.a_plus, c.k_plus)
                    } else {
                        (0, 1, c.a_minus, c.k_minus)
                    }
                } else {
                    let xj = map.fixed_points[j].position;
                    let piece = if e.xi < xj { 2 * j - 1 } else { 2 * j };
                    let acc = br.inverse(e.xi);
                    (piece, 0, br.deriv(acc), 1.0)
                };
                let accumulation = br.inverse(e.xi);
                if !inducing.contains(accumulation) {
                    return Err(Error::MalformedInducingSet { x: accumulation });
                }
                let bounds = (min_depth..=n + 1)
                    .map(|m| br.inverse(e.position(e.dist[m])))
                    .collect();
                families.push(EntryFamily {
                    excursion: ei,
                    branch: j,
                    piece,
                    min_depth,
                    accumulation,
                    bounds,
                    local_a,
                    local_k,
                });
            }
        }
        Ok(Self {
            inducing,
            excursions,
            families,
            depth: n,
            truncated_at,
        })
    }

    pub fn excursion_for(&self, fixed_point: usize, side: f64) -> Option<usize> {
        self.excursions
            .iter()
            .position(|e| e.fixed_point == fixed_point && e.side == side)
    }

    /// Excursion whose region contains the gap point `x` around fixed point `k`.
    #[inline]
    pub fn excursion_at(&self, k: usize, x: f64) -> Option<usize> {
        self.excursions
            .iter()
            .position(|e| e.fixed_point == k && (x - e.xi) * e.side > 0.0)
    }

    /// Entry family and depth of a point of `Y`; depths past the table are
    /// reported as `depth + 1`.
    pub fn locate_entry(&self, y: f64) -> Option<(usize, usize)> {
        let piece = match self.inducing.region(y) {
            Region::Piece(p) => p,
            Region::Gap(_) => return None,
        };
        for (fi, f) in self.families.iter().enumerate() {
            if f.piece != piece {
                continue;
            }
            let (a, b) = f.span();
            if y < a || y > b {
                continue;
            }
            let delta = (y - f.accumulation).abs();
            let c = f.bounds.partition_point(|&p| (p - f.accumulation).abs() >= delta);
            if c == 0 {
                continue;
            }
            let m = f.min_depth + c - 1;
            return Some((fi, m.min(self.depth + 1)));
        }
        None
    }
}

/// One excursion out of `Y` and back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnSample {
    pub start: f64,
    pub tau: u64,
    /// Steps spent around each fixed point.
    pub excursions: Vec<u64>,
    pub exit: f64,
    pub beyond_table: bool,
}

/// First return to `Y` by direct iteration.
pub fn return_orbit(map: &IntervalMap, y: &InducingSet, x: f64, cap: u64) -> Result<ReturnSample> {
    map.check_domain(x)?;
    if !y.contains(x) {
        return Err(Error::NotInInducingSet { x });
    }
    let mut exc = vec![0u64; map.d()];
    let mut z = x;
    for t in 1..=cap {
        let next = map.apply(z);
        match y.region(next) {
            Region::Piece(_) => {
                return Ok(ReturnSample {
                    start: x,
                    tau: t,
                    excursions: exc,
                    exit: next,
                    beyond_table: false,
                })
            }
            Region::Gap(k) => exc[k] += 1,
        }
        if next == z {
            return Err(Error::IterationCap {
                cap: t,
                stagnated: true,
            });
        }
        z = next;
    }
    Err(Error::IterationCap {
        cap,
        stagnated: false,
    })
}

/// First return using the cell table to skip the neutral excursion in one step.
/// The return time is exact inside the table; the exit point is placed at the
/// same relative position inside `X_{k,1}`, so statistics are correct but
/// individual orbits are not reproduced.
pub fn return_orbit_skip(map: &IntervalMap, cells: &CellTable, x: f64) -> Result<ReturnSample> {
    map.check_domain(x)?;
    if !cells.inducing.contains(x) {
        return Err(Error::NotInInducingSet { x });
    }
    let mut exc = vec![0u64; map.d()];
    let next = map.apply(x);
    let k = match cells.inducing.region(next) {
        Region::Piece(_) => {
            return Ok(ReturnSample {
                start: x,
                tau: 1,
                excursions: exc,
                exit: next,
                beyond_table: false,
            })
        }
        Region::Gap(k) => k,
    };
    let e = cells
        .excursion_at(k, next)
        .ok_or(Error::IterationCap {
            cap: 1,
            stagnated: true,
        })?;
    let ex = &cells.excursions[e];
    let pos = ex.locate((next - ex.xi).abs());
    let m = pos.depth.max(1);
    exc[k] = m;
    let last = ex.position(ex.dist_at(1, pos.fraction));
    Ok(ReturnSample {
        start: x,
        tau: m + 1,
        excursions: exc,
        exit: map.apply(last),
        beyond_table: pos.beyond,
    })
}

/// Return-time tails `mu(tau^(k) > n)` and `mu(tau^(k) = n)` per fixed point,
/// and `mu(tau > n)`, for the measure given by its interval function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailStats {
    /// `gt[k][n] = mu(tau^(k) > n)` for `n = 0 ..= N`.
    pub gt: Vec<Vec<f64>>,
    /// `eq[k][n] = mu(tau^(k) = n)`; `eq[k][0]` is unused.
    pub eq: Vec<Vec<f64>>,
    /// `tau_gt[n] = mu(tau > n)` for `n = 0 ..= N + 1`.
    pub tau_gt: Vec<f64>,
}

pub fn tail_statistics<M: Fn(f64, f64) -> f64>(map: &IntervalMap, cells: &CellTable, measure: M) -> TailStats {
    let n = cells.depth;
    let d = map.d();
    let mut gt = vec![vec![0.0; n + 1]; d];
    let mut eq = vec![vec![0.0; n + 1]; d];
    for f in &cells.families {
        let k = cells.excursions[f.excursion].fixed_point;
        for m in 0..=n {
            let (a, b) = f.beyond(m);
            gt[k][m] += measure(a, b);
            if m >= f.min_depth.max(1) {
                let (a, b) = f.cell(m);
                eq[k][m] += measure(a, b);
            }
        }
    }
    let total: f64 = cells
        .inducing
        .components
        .iter()
        .map(|&(a, b)| measure(a, b))
        .sum();
    let mut tau_gt = vec![total];
    for m in 0..=n {
        tau_gt.push((0..d).map(|k| gt[k][m]).sum());
    }
    TailStats { gt, eq, tau_gt }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFit {
    pub kind: String,
    pub fixed_point: usize,
    pub side: f64,
    pub branch: Option<usize>,
    pub fit: FitResult,
    pub expected_slope: f64,
    pub expected_prefactor: f64,
}

impl CellFit {
    pub fn slope_error(&self) -> f64 {
        (self.fit.slope - self.expected_slope).abs()
    }

    pub fn prefactor_error(&self) -> f64 {
        (self.fit.prefactor / self.expected_prefactor - 1.0).abs()
    }
}

/// Power-law fits of the cell lengths `|X_{k,n}|` and `|Y_{j,k,n}|`, with `n`
/// the return time of the cell.
pub fn cell_asymptotics(cells: &CellTable, window: (usize, usize)) -> Result<Vec<CellFit>> {
    if window.1 + 1 > cells.depth {
        return Err(Error::InsufficientDepth {
            needed: window.1 + 1,
            have: cells.depth,
        });
    }
    let mut out = Vec::new();
    for e in &cells.excursions {
        let fit = fit_power_law(|n| e.dist[n] - e.dist[n + 1], window)?;
        let a = 1.0 / e.p;
        out.push(CellFit {
            kind: "neutral".into(),
            fixed_point: e.fixed_point,
            side: e.side,
            branch: None,
            fit,
            expected_slope: -(1.0 + a),
            expected_prefactor: e.b.powf(-a) * a.powf(1.0 + a),
        });
    }
    for f in &cells.families {
        let e = &cells.excursions[f.excursion];
        let fit = fit_power_law(
            |n| {
                let (a, b) = f.cell(n - 1);
                b - a
            },
            window,
        )?;
        let a = 1.0 / (e.p * f.local_k);
        out.push(CellFit {
            kind: "entry".into(),
            fixed_point: e.fixed_point,
            side: e.side,
            branch: Some(f.branch),
            fit,
            expected_slope: -(1.0 + a),
            expected_prefactor: f.local_a.powf(-1.0 / f.local_k) * (e.p * e.b).powf(-a) * a,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub pairs: usize,
    /// Largest ratio on the calibration half.
    pub constant: f64,
    /// Largest ratio on the validation half.
    pub validation_max: f64,
}

impl DistortionReport {
    pub fn pass(&self) -> bool {
        self.validation_max <= 2.0 * self.constant
    }
}

/// Bounded-distortion diagnostic for the first-return map: the ratio
/// `|log(F'x / F'y)| / |Fx - Fy|` over random pairs in common cells.
pub fn distortion_check(
    map: &IntervalMap,
    cells: &CellTable,
    pairs: usize,
    max_depth: usize,
    seed: u64,
) -> Result<DistortionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = max_depth.min(cells.depth);
    let run = |x: f64| -> (f64, f64) {
        let mut z = x;
        let mut d = 1.0;
        loop {
            d *= map.deriv(z);
            z = map.apply(z);
            if cells.inducing.contains(z) {
                return (z, d);
            }
        }
    };
    let mut ratios = Vec::with_capacity(pairs);
    while ratios.len() < pairs {
        let f = &cells.families[rng.random_range(0..cells.families.len())];
        let m = rng.random_range(f.min_depth..=top);
        let (a, b) = f.cell(m);
        let x = a + (b - a) * rng.random::<f64>();
        let y = a + (b - a) * rng.random::<f64>();
        let (fx, dx) = run(x);
        let (fy, dy) = run(y);
        let gap = (fx - fy).abs();
        if gap == 0.0 || !cells.inducing.contains(x) || !cells.inducing.contains(y) {
            continue;
        }
        ratios.push((dx / dy).ln().abs() / gap);
    }
    let half = pairs / 2;
    let constant = ratios[..half].iter().cloned().fold(0.0, f64::max);
    let validation_max = ratios[half..].iter().cloned().fold(0.0, f64::max);
    Ok(DistortionReport {
        pairs,
        constant,
        validation_max,
    })
}
