//! The invariant density of the first-return map, the natural weights of the
//! fixed points, and the decay of the mass returning to `Y`.

use serde::{Deserialize, Serialize};

use crate::arcsine::SimplexPoint;
use crate::asymptotics::{fit_loglog, fit_power_law, geometric_indices, FitResult};
use crate::error::{Error, Result};
use crate::induced::{tail_statistics, CellTable};
use crate::map::IntervalMap;
use crate::montecarlo::{pushforward_positions, Engine, InitialDensity};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensityConfig {
    /// Total number of grid intervals over `Y`.
    pub grid_size: usize,
    pub tol: f64,
    /// Number of inverse-branch steps summed explicitly before the tail closure.
    pub max_branch_depth: usize,
    pub max_sweeps: usize,
    /// Largest acceptable share of the operator mass carried by the tail closure.
    pub tail_limit: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            grid_size: 1024,
            tol: 1e-8,
            max_branch_depth: 10_000,
            max_sweeps: 10_000,
            tail_limit: 0.01,
        }
    }
}

/// Piecewise-linear density on one piece of `Y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceGrid {
    pub lo: f64,
    pub hi: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl PieceGrid {
    fn new(lo: f64, hi: f64, intervals: usize) -> Self {
        let nodes: Vec<f64> = (0..=intervals)
            .map(|i| {
                if i == intervals {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / intervals as f64
                }
            })
            .collect();
        let n = nodes.len();
        Self {
            lo,
            hi,
            nodes,
            values: vec![0.0; n],
            cumulative: vec![0.0; n],
        }
    }

    #[inline]
    fn interval(&self, x: f64) -> usize {
        let i = self.nodes.partition_point(|&v| v <= x);
        i.clamp(1, self.nodes.len() - 1) - 1
    }

    /// Interpolation weights `(i, 1 - t, t)` of `x` on nodes `i`, `i + 1`.
    #[inline]
    fn weights(&self, x: f64) -> (usize, f64, f64) {
        let i = self.interval(x);
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
        (i, 1.0 - t, t)
    }

    /// Four-point Lagrange stencil `(first node, weights)` at `x`.
    #[inline]
    fn stencil(&self, x: f64) -> (usize, [f64; 4]) {
        let n = self.nodes.len();
        let i = self.interval(x);
        let s = i.saturating_sub(1).min(n - 4);
        let z = &self.nodes[s..s + 4];
        let mut w = [1.0; 4];
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    w[a] *= (x - z[b]) / (z[a] - z[b]);
                }
            }
        }
        (s, w)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, wa, wb) = self.weights(x);
        wa * self.values[i] + wb * self.values[i + 1]
    }

    fn refresh(&mut self) {
        self.cumulative[0] = 0.0;
        for i in 1..self.nodes.len() {
            self.cumulative[i] = self.cumulative[i - 1]
                + 0.5 * (self.nodes[i] - self.nodes[i - 1]) * (self.values[i] + self.values[i - 1]);
        }
    }

    fn primitive(&self, x: f64) -> f64 {
        let i = self.interval(x);
        self.cumulative[i] + 0.5 * (x - self.nodes[i]) * (self.values[i] + self.eval(x))
    }

    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        let a = a.max(self.lo);
        let b = b.min(self.hi);
        if b <= a {
            return 0.0;
        }
        if self.interval(a) == self.interval(b) {
            return 0.5 * (b - a) * (self.eval(a) + self.eval(b));
        }
        self.primitive(b) - self.primitive(a)
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Trapezoid weights of the nodes.
    fn quadrature_weights(&self) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.nodes[i] - self.nodes[i - 1] } else { 0.0 };
                let right = if i + 1 < n { self.nodes[i + 1] - self.nodes[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }
}

/// Invariant density `h` of the first-return map, normalized to `int_Y h = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub pieces: Vec<PieceGrid>,
    /// `sup |L h - h|` for the undamped operator.
    pub residual: f64,
    pub sweeps: usize,
    /// Share of the operator mass carried by the tail closure.
    pub tail_mass: f64,
    pub branch_depth: usize,
    /// Largest difference quotient of `log h` between neighbouring nodes.
    pub log_lipschitz: f64,
}

impl DensityGrid {
    fn piece_of(&self, x: f64) -> Option<usize> {
        let i = self.pieces.partition_point(|p| p.lo <= x);
        if i == 0 {
            return None;
        }
        let p = &self.pieces[i - 1];
        if x <= p.hi {
            Some(i - 1)
        } else {
            None
        }
    }

    /// `h(x)`, or `None` outside `Y`. At a split point the right piece is used.
    pub fn eval(&self, x: f64) -> Option<f64> {
        self.piece_of(x).map(|i| self.pieces[i].eval(x))
    }

    pub fn eval_in_piece(&self, piece: usize, x: f64) -> f64 {
        self.pieces[piece].eval(x)
    }

    /// `int_a^b h` over the part of `[a, b]` inside `Y`.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        self.pieces.iter().map(|p| p.integrate(a, b)).sum()
    }

    pub fn total(&self) -> f64 {
        self.pieces.iter().map(|p| p.total()).sum()
    }

    /// Cells `(left, right, mean value)` for export.
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        self.pieces
            .iter()
            .flat_map(|p| {
                (0..p.nodes.len() - 1).map(move |i| {
                    (p.nodes[i], p.nodes[i + 1], 0.5 * (p.values[i] + p.values[i + 1]))
                })
            })
            .collect()
    }

    fn set_flat(&mut self, v: &[f64]) {
        let mut k = 0;
        for p in &mut self.pieces {
            for x in p.values.iter_mut() {
                *x = v[k];
                k += 1;
            }
            p.refresh();
        }
    }
}

/// Sparse operator on the stacked node values of all pieces.
struct Operator {
    rows: Vec<Vec<(usize, f64)>>,
    tail: Vec<Vec<(usize, f64)>>,
}

impl Operator {
    fn apply(&self, v: &[f64], with_tail: bool) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.tail)
            .map(|(r, t)| {
                let mut s: f64 = r.iter().map(|&(j, w)| w * v[j]).sum();
                if with_tail {
                    s += t.iter().map(|&(j, w)| w * v[j]).sum::<f64>();
                }
                s
            })
            .collect()
    }

    fn apply_tail(&self, v: &[f64]) -> Vec<f64> {
        self.tail
            .iter()
            .map(|t| t.iter().map(|&(j, w)| w * v[j]).sum())
            .collect()
    }
}

// Gauss-Legendre rule on [0, 1].
const GAUSS_NODES: [f64; 5] = [
    0.046_910_077_030_668,
    0.230_765_344_947_158,
    0.5,
    0.769_234_655_052_842,
    0.953_089_922_969_332,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.118_463_442_528_095,
    0.239_314_335_249_683,
    0.284_444_444_444_444,
    0.239_314_335_249_683,
    0.118_463_442_528_095,
];

#[inline]
fn scatter(
    grid: &DensityGrid,
    offsets: &[usize],
    scratch: &mut [f64],
    touched: &mut Vec<usize>,
    piece: usize,
    x: f64,
    w: f64,
) {
    let (s, ws) = grid.pieces[piece].stencil(x);
    for (q, &ww) in ws.iter().enumerate() {
        let j = offsets[piece] + s + q;
        if scratch[j] == 0.0 {
            touched.push(j);
        }
        scratch[j] += w * ww;
    }
}

fn assemble(map: &IntervalMap, cells: &CellTable, grid: &DensityGrid, depth: usize) -> Operator {
    let offsets: Vec<usize> = grid
        .pieces
        .iter()
        .scan(0, |acc, p| {
            let o = *acc;
            *acc += p.nodes.len();
            Some(o)
        })
        .collect();
    let total = offsets.last().unwrap() + grid.pieces.last().unwrap().nodes.len();
    let mut rows = vec![Vec::new(); total];
    let mut tail = vec![Vec::new(); total];
    let clm = map.clm.is_some();
    let mut scratch = vec![0.0; total];
    let mut touched: Vec<usize> = Vec::new();

    for (ei, e) in cells.excursions.iter().enumerate() {
        let neutral = &map.branches[e.branch];
        let families: Vec<_> = cells.families.iter().filter(|f| f.excursion == ei).collect();
        // Pieces of Y the excursion lands in.
        let targets: Vec<usize> = if clm {
            vec![0, 1]
        } else {
            let (lo, hi) = (e.xi + e.side * e.dist[1], e.xi + e.side * e.dist[0]);
            let mid = 0.5 * (lo + hi);
            grid.pieces
                .iter()
                .position(|p| p.lo <= mid && mid <= p.hi)
                .into_iter()
                .collect()
        };
        for &pi in &targets {
            let piece = &grid.pieces[pi];
            for (ni, &y) in piece.nodes.iter().enumerate() {
                let row = offsets[pi] + ni;
                let mut d = (y - e.xi).abs();
                let mut jac = 1.0;
                for m in 0..=depth {
                    if m > 0 {
                        d = neutral.inverse_offset(e.side * d).abs();
                        jac /= neutral.deriv(e.position(d));
                    }
                    for f in &families {
                        if m < f.min_depth {
                            continue;
                        }
                        let br = &map.branches[f.branch];
                        let x = br.inverse(e.position(d));
                        scatter(grid, &offsets, &mut scratch, &mut touched, f.piece, x, jac / br.deriv(x));
                    }
                }
                touched.sort_unstable();
                rows[row].extend(touched.iter().map(|&j| (j, scratch[j])));
                for &j in &touched {
                    scratch[j] = 0.0;
                }
                touched.clear();

                // Remaining terms m > depth through an approximate Fatou coordinate,
                // sum_{m>M} J_m phi(d_m) ~ J_M (Phi'(d_M) int_0^{d_M} phi - phi(d_M) / 2)
                // with Phi'(d) = (1 + D'(d) / 2) / D(d) and D the displacement.
                let z = e.position(d);
                let fatou = (1.0 + 0.5 * (neutral.deriv(z) - 1.0).abs()) / neutral.displacement(z).abs();
                for f in &families {
                    let br = &map.branches[f.branch];
                    let x = br.inverse(e.position(d));
                    scatter(grid, &offsets, &mut scratch, &mut touched, f.piece, x, -0.5 * jac / br.deriv(x));
                    for (t, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                        let x = br.inverse(e.position(t * d));
                        let w = jac * d * w * fatou / br.deriv(x);
                        scatter(grid, &offsets, &mut scratch, &mut touched, f.piece, x, w);
                    }
                }
                touched.sort_unstable();
                tail[row].extend(touched.iter().map(|&j| (j, scratch[j])));
                for &j in &touched {
                    scratch[j] = 0.0;
                }
                touched.clear();
            }
        }
    }
    Operator { rows, tail }
}

fn empty_grid(cells: &CellTable, grid_size: usize) -> DensityGrid {
    let measure = cells.inducing.measure();
    let pieces = cells
        .inducing
        .pieces
        .iter()
        .map(|&(a, b)| {
            let n = (((b - a) / measure * grid_size as f64).round() as usize).max(8);
            PieceGrid::new(a, b, n)
        })
        .collect();
    DensityGrid {
        pieces,
        residual: f64::NAN,
        sweeps: 0,
        tail_mass: f64::NAN,
        branch_depth: 0,
        log_lipschitz: f64::NAN,
    }
}

/// Fixed point of the transfer operator of the first-return map.
///
/// The first-return map of a two-branch map swaps the two halves of `Y`, so
/// the plain power iteration oscillates; the damped update `(v + L v) / 2`
/// has the same fixed points and converges.
pub fn induced_density(map: &IntervalMap, cells: &CellTable, cfg: &DensityConfig) -> Result<DensityGrid> {
    if cfg.grid_size < 16 {
        return Err(Error::InvalidParameter("grid size must be at least 16".into()));
    }
    let depth = cfg.max_branch_depth;
    let mut grid = empty_grid(cells, cfg.grid_size);
    let op = assemble(map, cells, &grid, depth);
    let weights: Vec<f64> = grid.pieces.iter().flat_map(|p| p.quadrature_weights()).collect();
    let integral = |v: &[f64]| -> f64 { v.iter().zip(&weights).map(|(a, b)| a * b).sum() };

    let mut v = vec![1.0 / cells.inducing.measure(); weights.len()];
    let mut sweeps = 0;
    loop {
        let lv = op.apply(&v, true);
        let mut next: Vec<f64> = v.iter().zip(&lv).map(|(a, b)| 0.5 * (a + b)).collect();
        let s = integral(&next);
        next.iter_mut().for_each(|x| *x /= s);
        let change = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        sweeps += 1;
        if change < 0.1 * cfg.tol {
            break;
        }
        if sweeps >= cfg.max_sweeps {
            return Err(Error::NonConvergence {
                what: "density iteration",
                iterations: sweeps,
            });
        }
    }
    let lv = op.apply(&v, true);
    let residual = lv.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let tail_mass = integral(&op.apply_tail(&v)) / integral(&lv);
    grid.set_flat(&v);
    let mut lip: f64 = 0.0;
    for p in &grid.pieces {
        for i in 0..p.nodes.len() - 1 {
            let q = (p.values[i + 1].ln() - p.values[i].ln()).abs() / (p.nodes[i + 1] - p.nodes[i]);
            lip = lip.max(q);
        }
    }
    grid.residual = residual;
    grid.sweeps = sweeps;
    grid.tail_mass = tail_mass;
    grid.branch_depth = depth;
    grid.log_lipschitz = lip;
    if tail_mass > cfg.tail_limit {
        return Err(Error::TailMassTooLarge {
            mass: tail_mass,
            limit: cfg.tail_limit,
        });
    }
    if residual > 10.0 * cfg.tol {
        return Err(Error::NonConvergence {
            what: "density residual",
            iterations: sweeps,
        });
    }
    Ok(grid)
}

/// `sup |h_N - h_{2N}|` over the finer nodes.
pub fn refinement_error(coarse: &DensityGrid, fine: &DensityGrid) -> f64 {
    fine.pieces
        .iter()
        .zip(&coarse.pieces)
        .flat_map(|(f, c)| f.nodes.iter().zip(&f.values).map(move |(&x, &v)| (c.eval(x) - v).abs()))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaturalWeights {
    pub p_bar: SimplexPoint,
    /// Unnormalized tail constants `c_k` with `mu(tau^(k) > n) ~ c_k n^(-alpha)`.
    pub constants: Vec<f64>,
    pub method: String,
    /// For the two-branch family: the alternative reading
    /// `h a^(-1/k) (ell b)^(-1/alpha) alpha^2`, for comparison.
    pub literal_constants: Option<Vec<f64>>,
    /// Fitted slopes of `n^alpha mu(tau^(k) > n)` (tail fit only).
    pub plateau_slopes: Option<Vec<f64>>,
}

/// `c_k` from the density at the accumulation points `g_j(xi_k)` and the local
/// forms of the branches there.
pub fn natural_weights_formula(map: &IntervalMap, cells: &CellTable, h: &DensityGrid) -> Result<NaturalWeights> {
    let d = map.d();
    let mut c = vec![0.0; d];
    for f in &cells.families {
        let e = &cells.excursions[f.excursion];
        if !cells.inducing.contains(f.accumulation) {
            return Err(Error::MalformedInducingSet { x: f.accumulation });
        }
        let a = 1.0 / (e.p * f.local_k);
        let hv = h.eval_in_piece(f.piece, f.accumulation);
        c[e.fixed_point] += hv * f.local_a.powf(-1.0 / f.local_k) * (e.p * e.b).powf(-a);
    }
    let literal = map.clm.as_ref().map(|p| {
        let alpha = map.alpha;
        let mut lit = vec![0.0; d];
        for f in &cells.families {
            let e = &cells.excursions[f.excursion];
            let (ell, b) = if e.fixed_point == 0 {
                (p.ell_minus, p.b_minus)
            } else {
                (p.ell_plus, p.b_plus)
            };
            let hv = h.eval_in_piece(f.piece, f.accumulation);
            lit[e.fixed_point] +=
                hv * f.local_a.powf(-1.0 / f.local_k) * (ell * b).powf(-1.0 / alpha) * alpha * alpha;
        }
        lit
    });
    Ok(NaturalWeights {
        p_bar: SimplexPoint::normalized(&c)?,
        constants: c,
        method: "formula".into(),
        literal_constants: literal,
        plateau_slopes: None,
    })
}

/// `c_k` read off the plateau of `n^alpha mu(tau^(k) > n)` near the end of the
/// cell table.
pub fn natural_weights_tailfit(map: &IntervalMap, cells: &CellTable, h: &DensityGrid) -> Result<NaturalWeights> {
    let n = cells.depth;
    if n < 1000 {
        return Err(Error::InsufficientDepth { needed: 1000, have: n });
    }
    let alpha = map.alpha;
    let t = tail_statistics(map, cells, |a, b| h.integrate(a, b));
    let window = (n / 100, n);
    let mut c = Vec::new();
    let mut slopes = Vec::new();
    for k in 0..map.d() {
        let plateau = |m: usize| (m as f64).powf(alpha) * t.gt[k][m];
        let fit = fit_power_law(plateau, window)?;
        if fit.slope.abs() > 0.05 {
            return Err(Error::PlateauNotReached { slope: fit.slope });
        }
        slopes.push(fit.slope);
        let top = geometric_indices(n / 10, n, 20);
        c.push(top.iter().map(|&m| plateau(m)).sum::<f64>() / top.len() as f64);
    }
    Ok(NaturalWeights {
        p_bar: SimplexPoint::normalized(&c)?,
        constants: c,
        method: "tail-fit".into(),
        literal_constants: None,
        plateau_slopes: Some(slopes),
    })
}

/// Return-time tail summary under the invariant measure of the first-return map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSummary {
    pub tau_fit: FitResult,
    pub per_fixed_point: Vec<FitResult>,
    /// `max / min` of `n^(1+alpha) mu(tau = n)` over the window.
    pub h4_spread: f64,
    pub h4_max: f64,
    /// `c_tau` with `mu(tau > n) ~ c_tau n^(-alpha)`, plateau estimate.
    pub c_tau: f64,
}

pub fn tail_summary(map: &IntervalMap, cells: &CellTable, h: &DensityGrid, window: (usize, usize)) -> Result<TailSummary> {
    if window.1 + 1 > cells.depth {
        return Err(Error::InsufficientDepth {
            needed: window.1 + 1,
            have: cells.depth,
        });
    }
    let alpha = map.alpha;
    let t = tail_statistics(map, cells, |a, b| h.integrate(a, b));
    let tau_fit = fit_power_law(|n| t.tau_gt[n], window)?;
    let per_fixed_point = (0..map.d())
        .map(|k| fit_power_law(|n| t.gt[k][n], window))
        .collect::<Result<Vec<_>>>()?;
    let eq_tau = |n: usize| t.tau_gt[n - 1] - t.tau_gt[n];
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for n in geometric_indices(window.0, window.1, 40) {
        let v = (n as f64).powf(1.0 + alpha) * eq_tau(n);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let top = geometric_indices(window.1 / 10, window.1, 20);
    let c_tau = top
        .iter()
        .map(|&n| (n as f64).powf(alpha) * t.tau_gt[n])
        .sum::<f64>()
        / top.len() as f64;
    Ok(TailSummary {
        tau_fit,
        per_fixed_point,
        h4_spread: hi / lo,
        h4_max: hi,
        c_tau,
    })
}

/// Mass `m_n = (f^n_* lambda)(Y)` along a list of times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub alpha: f64,
    pub n: Vec<u64>,
    pub mass: Vec<f64>,
    pub se: Vec<f64>,
    /// Log-log fit of `m_n` over the window (`alpha < 1`).
    pub fit: Option<FitResult>,
    /// `m_n log n` over the window and its relative spread `max / min - 1` (`alpha = 1`).
    pub log_product: Option<Vec<f64>>,
    pub log_spread: Option<f64>,
    /// No increase beyond three standard errors between consecutive times.
    pub decreasing: bool,
    /// Predicted prefactor: `sin(pi alpha) / (pi c_tau)`, or `1 / c_tau` for the
    /// logarithmic rate, when `c_tau` is supplied.
    pub predicted_prefactor: Option<f64>,
    pub flagged: usize,
}

pub fn return_mass_decay(
    engine: &Engine,
    lambda: &InitialDensity,
    n_list: &[u64],
    window: (u64, u64),
    orbits: u64,
    seed: u64,
    c_tau: Option<f64>,
    workers: Option<usize>,
) -> Result<DecayReport> {
    let (_, at, flagged) = pushforward_positions(engine, lambda, n_list, orbits, seed, workers)?;
    let mut mass = Vec::new();
    let mut se = Vec::new();
    for xs in &at {
        let m = xs.iter().filter(|&&x| engine.inducing.contains(x)).count() as f64 / orbits as f64;
        mass.push(m);
        se.push((m * (1.0 - m) / orbits as f64).sqrt());
    }
    let last = mass.len() - 1;
    let rel = se[last] / mass[last];
    if !(rel <= 0.2) {
        return Err(Error::EnsembleTooSmall {
            rel_se: rel,
            n: n_list[last],
        });
    }
    let alpha = engine.map.alpha;
    let in_window: Vec<usize> = (0..n_list.len())
        .filter(|&i| n_list[i] >= window.0 && n_list[i] <= window.1)
        .collect();
    if in_window.len() < 2 {
        return Err(Error::InvalidParameter("fit window holds fewer than two times".into()));
    }
    let decreasing = (1..mass.len()).all(|i| mass[i] <= mass[i - 1] + 3.0 * se[i].hypot(se[i - 1]));
    let (fit, log_product, log_spread) = if alpha < 1.0 {
        let x: Vec<f64> = in_window.iter().map(|&i| n_list[i] as f64).collect();
        let y: Vec<f64> = in_window.iter().map(|&i| mass[i]).collect();
        (Some(fit_loglog(&x, &y, None)?), None, None)
    } else {
        let prod: Vec<f64> = in_window.iter().map(|&i| mass[i] * (n_list[i] as f64).ln()).collect();
        let hi = prod.iter().cloned().fold(f64::MIN, f64::max);
        let lo = prod.iter().cloned().fold(f64::MAX, f64::min);
        (None, Some(prod), Some(hi / lo - 1.0))
    };
    let predicted_prefactor = c_tau.map(|c| {
        if alpha < 1.0 {
            (std::f64::consts::PI * alpha).sin() / (std::f64::consts::PI * c)
        } else {
            1.0 / c
        }
    });
    Ok(DecayReport {
        alpha,
        n: n_list.to_vec(),
        mass,
        se,
        fit,
        log_product,
        log_spread,
        decreasing,
        predicted_prefactor,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{build_clm_map, build_thaler_map};

    fn small() -> DensityConfig {
        DensityConfig {
            grid_size: 256,
            ..Default::default()
        }
    }

    #[test]
    fn piecewise_linear_integration_is_exact() {
        let mut p = PieceGrid::new(0.0, 1.0, 4);
        p.values = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        p.refresh();
        // h(x) = 4x
        assert!((p.integrate(0.1, 0.9) - 2.0 * (0.81 - 0.01)).abs() < 1e-14);
        assert!((p.integrate(0.3, 0.31) - 2.0 * (0.31f64.powi(2) - 0.09)).abs() < 1e-14);
        assert!((p.total() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn symmetric_density_is_symmetric_and_normalized() {
        let m = build_thaler_map(0.5, &[0.5], None).unwrap();
        let cells = CellTable::build(&m, 100).unwrap();
        let h = induced_density(&m, &cells, &small()).unwrap();
        assert!((h.total() - 1.0).abs() < 1e-12);
        assert!(h.residual < 1e-7);
        assert!(h.tail_mass < 0.01);
        for &x in &[0.4, 0.45, 0.48] {
            let a = h.eval(x).unwrap();
            let b = h.eval(1.0 - x).unwrap();
            assert!((a - b).abs() < 1e-6 * a, "{a} {b}");
        }
        let w = natural_weights_formula(&m, &cells, &h).unwrap();
        assert!((w.p_bar[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn clm_density_matches_conjugate_thaler() {
        // y = 2x - 1 conjugates CLM(2) to the symmetric map. Both induced
        // densities restrict the same invariant density, so they are proportional.
        let t = build_thaler_map(0.5, &[0.5], None).unwrap();
        let c = build_clm_map(2.0).unwrap();
        let ct = CellTable::build(&t, 100).unwrap();
        let cc = CellTable::build(&c, 100).unwrap();
        let ht = induced_density(&t, &ct, &small()).unwrap();
        let hc = induced_density(&c, &cc, &small()).unwrap();
        let ratio = |x: f64| ht.eval(x).unwrap() / (2.0 * hc.eval(2.0 * x - 1.0).unwrap());
        let r0 = ratio(0.5);
        for &x in &[0.39, 0.42, 0.47, 0.55, 0.6] {
            assert!((ratio(x) / r0 - 1.0).abs() < 1e-4, "x={x}: {} {r0}", ratio(x));
        }
        let w = natural_weights_formula(&c, &cc, &hc).unwrap();
        assert!((w.p_bar[0] - 0.5).abs() < 1e-6);
        assert!(w.literal_constants.is_some());
    }

    #[test]
    fn tail_closure_matches_long_sums() {
        let m = build_thaler_map(0.5, &[0.4], None).unwrap();
        let cells = CellTable::build(&m, 100).unwrap();
        let short = induced_density(
            &m,
            &cells,
            &DensityConfig {
                grid_size: 128,
                max_branch_depth: 2_000,
                tail_limit: 0.05,
                ..Default::default()
            },
        )
        .unwrap();
        let long = induced_density(
            &m,
            &cells,
            &DensityConfig {
                grid_size: 128,
                max_branch_depth: 40_000,
                ..Default::default()
            },
        )
        .unwrap();
        let err = refinement_error(&short, &long);
        assert!(err < 1e-3 * long.eval(0.4).unwrap(), "{err}");
    }

    #[test]
    fn tiny_grid_is_rejected() {
        let m = build_thaler_map(0.5, &[0.5], None).unwrap();
        let cells = CellTable::build(&m, 10).unwrap();
        let cfg = DensityConfig {
            grid_size: 4,
            ..Default::default()
        };
        assert!(induced_density(&m, &cells, &cfg).is_err());
    }
}
