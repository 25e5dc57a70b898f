//! Finite-size scaling: data collapse for `(p_c, ν)`, `z` and `η`, curve
//! crossings, and the `c_eff` double fit.
//!
//! Collapse quality: every point is compared with a straight line through its
//! four nearest neighbours (in the scaled abscissa) taken from the other
//! sizes, the residual is divided by the combined standard error, and the
//! mean square over all points is minimized with Nelder–Mead started from the
//! three best nodes of a coarse grid.

use std::f64::consts::PI;

use argmin::core::{CostFunction, Executor, State, TerminationReason};
use argmin::solver::neldermead::NelderMead;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::Estimate;
use crate::observables::SeriesPoint;
use crate::stats::{linear_fit, summarize_replicas, BootstrapEstimate, DEFAULT_RESAMPLES};

/// One `(L, x, y ± stderr)` point of a scaling curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSample {
    pub size: usize,
    pub x: f64,
    pub y: f64,
    pub stderr: f64,
}

impl ScalingSample {
    /// Rate-resolved points (`x = p`).
    pub fn from_rate_points(points: &[SeriesPoint]) -> Vec<Self> {
        points
            .iter()
            .map(|p| ScalingSample { size: p.size, x: p.p, y: p.mean, stderr: p.stderr })
            .collect()
    }

    /// Time-resolved points (`x = t`).
    pub fn from_time_points(points: &[SeriesPoint]) -> Vec<Self> {
        points
            .iter()
            .map(|p| ScalingSample { size: p.size, x: p.t as f64, y: p.mean, stderr: p.stderr })
            .collect()
    }
}

/// Per-trajectory values of the points `xs` of one size; row `i` is trajectory
/// `i`. Points in one block share trajectories and are resampled together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBlock {
    pub size: usize,
    pub xs: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl TrajectoryBlock {
    fn summarize(&self, counts: Option<&[u32]>) -> Vec<ScalingSample> {
        let mut n = 0.0;
        let mut sum = vec![0.0; self.xs.len()];
        let mut sq = vec![0.0; self.xs.len()];
        for (i, row) in self.rows.iter().enumerate() {
            let w = counts.map_or(1.0, |c| c[i] as f64);
            n += w;
            for (k, v) in row.iter().enumerate() {
                sum[k] += w * v;
                sq[k] += w * v * v;
            }
        }
        self.xs
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let mean = sum[k] / n;
                let var = (sq[k] / n - mean * mean).max(0.0);
                ScalingSample { size: self.size, x, y: mean, stderr: (var / n).sqrt() }
            })
            .collect()
    }
}

/// Collapse input: summary points (bootstrapped parametrically) or raw
/// per-trajectory blocks (bootstrapped over trajectories).
#[derive(Clone, Debug, PartialEq)]
pub enum CollapseData {
    Summary(Vec<ScalingSample>),
    Trajectories(Vec<TrajectoryBlock>),
}

impl CollapseData {
    pub fn samples(&self) -> Vec<ScalingSample> {
        match self {
            CollapseData::Summary(s) => s.clone(),
            CollapseData::Trajectories(b) => b.iter().flat_map(|b| b.summarize(None)).collect(),
        }
    }

    fn replica(&self, seed: u64, r: usize) -> Vec<ScalingSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        match self {
            CollapseData::Summary(s) => s
                .iter()
                .map(|p| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    ScalingSample { y: p.y + p.stderr * z, ..*p }
                })
                .collect(),
            CollapseData::Trajectories(blocks) => blocks
                .iter()
                .flat_map(|b| {
                    let n = b.rows.len();
                    let mut counts = vec![0u32; n];
                    for _ in 0..n {
                        counts[rand::Rng::random_range(&mut rng, 0..n)] += 1;
                    }
                    b.summarize(Some(&counts))
                })
                .collect(),
        }
    }

    fn provenance(&self) -> (Vec<usize>, Vec<usize>) {
        let mut sizes: Vec<usize> = match self {
            CollapseData::Summary(s) => s.iter().map(|p| p.size).collect(),
            CollapseData::Trajectories(b) => b.iter().map(|b| b.size).collect(),
        };
        sizes.sort_unstable();
        sizes.dedup();
        let counts = sizes
            .iter()
            .map(|l| match self {
                CollapseData::Summary(s) => s.iter().filter(|p| p.size == *l).count(),
                CollapseData::Trajectories(b) => {
                    b.iter().filter(|b| b.size == *l).map(|b| b.rows.len()).sum()
                }
            })
            .collect();
        (sizes, counts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseKind {
    /// `y` vs `(x − p_c) L^{1/ν}`.
    PcNu,
    /// `y` vs `x / L^z`.
    Z,
    /// `y L^η` vs `x / L`.
    Eta,
}

impl CollapseKind {
    fn names(self) -> &'static [&'static str] {
        match self {
            CollapseKind::PcNu => &["p_c", "nu"],
            CollapseKind::Z => &["z"],
            CollapseKind::Eta => &["eta"],
        }
    }

    fn transform(self, q: &[f64], s: &ScalingSample) -> (f64, f64, f64) {
        let l = s.size as f64;
        match self {
            CollapseKind::PcNu => ((s.x - q[0]) * l.powf(1.0 / q[1]), s.y, s.stderr),
            CollapseKind::Z => (s.x / l.powf(q[0]), s.y, s.stderr),
            CollapseKind::Eta => {
                let k = l.powf(q[0]);
                (s.x / l, s.y * k, s.stderr * k)
            }
        }
    }

    /// Fewest distinct sizes a collapse of this kind accepts.
    pub fn min_sizes(self) -> usize {
        if self == CollapseKind::PcNu {
            3
        } else {
            2
        }
    }

    fn in_bounds(self, q: &[f64], x_range: (f64, f64)) -> bool {
        match self {
            CollapseKind::PcNu => q[0] >= x_range.0 && q[0] <= x_range.1 && q[1] >= 0.2 && q[1] <= 10.0,
            CollapseKind::Z => q[0] >= 0.1 && q[0] <= 4.0,
            CollapseKind::Eta => q[0] >= -2.0 && q[0] <= 3.0,
        }
    }

    fn grid(self, x_range: (f64, f64)) -> Vec<Vec<f64>> {
        let lin = |a: f64, b: f64, n: usize| (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64);
        match self {
            CollapseKind::PcNu => {
                let (lo, hi) = x_range;
                let pad = 0.05 * (hi - lo);
                lin(lo + pad, hi - pad, 9)
                    .flat_map(|pc| lin(0.5, 3.0, 9).map(move |nu| vec![pc, nu]))
                    .collect()
            }
            CollapseKind::Z => lin(0.3, 2.5, 12).map(|z| vec![z]).collect(),
            CollapseKind::Eta => lin(-0.5, 1.5, 11).map(|e| vec![e]).collect(),
        }
    }

    fn step(self, x_range: (f64, f64)) -> Vec<f64> {
        match self {
            CollapseKind::PcNu => vec![0.05 * (x_range.1 - x_range.0), 0.15],
            CollapseKind::Z => vec![0.1],
            CollapseKind::Eta => vec![0.1],
        }
    }
}

const NEIGHBOURS: usize = 4;
const MAX_ITERS: u64 = 2000;

/// Mean squared normalized residual of the points about their local master curve.
pub fn collapse_quality(kind: CollapseKind, params: &[f64], samples: &[ScalingSample]) -> f64 {
    let pts: Vec<(usize, f64, f64, f64)> = samples
        .iter()
        .map(|s| {
            let (x, y, e) = kind.transform(params, s);
            (s.size, x, y, e)
        })
        .collect();
    let scale = pts.iter().map(|p| p.3).fold(0.0, f64::max).max(1e-300);
    let mut total = 0.0;
    let mut used = 0usize;
    let mut near: Vec<(f64, usize)> = Vec::with_capacity(pts.len());
    for &(size, x, y, e) in &pts {
        near.clear();
        near.extend(
            pts.iter()
                .enumerate()
                .filter(|(_, q)| q.0 != size)
                .map(|(j, q)| ((q.1 - x).abs(), j)),
        );
        if near.len() < 2 {
            continue;
        }
        let k = NEIGHBOURS.min(near.len());
        near.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        let nb = &near[..k];
        let n = k as f64;
        let xm = nb.iter().map(|(_, j)| pts[*j].1).sum::<f64>() / n;
        let sxx: f64 = nb.iter().map(|(_, j)| (pts[*j].1 - xm).powi(2)).sum();
        // ŷ = Σ a_j y_j with a_j = 1/n + (x − x̄)(x_j − x̄)/Sxx
        let mut yhat = 0.0;
        let mut var = 0.0;
        for (_, j) in nb {
            let a = 1.0 / n + if sxx > 0.0 { (x - xm) * (pts[*j].1 - xm) / sxx } else { 0.0 };
            yhat += a * pts[*j].2;
            var += a * a * pts[*j].3 * pts[*j].3;
        }
        let sigma = (e * e + var).sqrt().max(1e-9 * scale);
        total += ((y - yhat) / sigma).powi(2);
        used += 1;
    }
    if used == 0 {
        f64::INFINITY
    } else {
        total / used as f64
    }
}

struct Objective<'a> {
    kind: CollapseKind,
    samples: &'a [ScalingSample],
    x_range: (f64, f64),
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, q: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        if !self.kind.in_bounds(q, self.x_range) {
            return Ok(1e30);
        }
        Ok(collapse_quality(self.kind, q, self.samples))
    }
}

struct Minimum {
    params: Vec<f64>,
    cost: f64,
    converged: bool,
    iterations: u64,
}

fn nelder_mead(obj: Objective<'_>, start: &[f64], step: &[f64]) -> Result<Minimum> {
    let mut simplex = vec![start.to_vec()];
    for (k, s) in step.iter().enumerate() {
        let mut v = start.to_vec();
        v[k] += s;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-10)
        .map_err(|e| Error::NonConvergence(e.to_string()))?;
    let res = Executor::new(obj, solver)
        .configure(|s| s.max_iters(MAX_ITERS))
        .run()
        .map_err(|e| Error::NonConvergence(e.to_string()))?;
    let state = res.state();
    Ok(Minimum {
        params: state.get_best_param().cloned().unwrap_or_else(|| start.to_vec()),
        cost: state.get_best_cost(),
        converged: matches!(state.get_termination_reason(), Some(TerminationReason::SolverConverged)),
        iterations: state.get_iter(),
    })
}

fn x_range(samples: &[ScalingSample]) -> (f64, f64) {
    samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.x), b.max(s.x)))
}

/// Best of three Nelder–Mead runs seeded at the best coarse-grid nodes.
fn minimize(kind: CollapseKind, samples: &[ScalingSample]) -> Result<Minimum> {
    let xr = x_range(samples);
    let obj = |s| Objective { kind, samples: s, x_range: xr };
    let mut grid: Vec<(f64, Vec<f64>)> = kind
        .grid(xr)
        .into_iter()
        .map(|q| (collapse_quality(kind, &q, samples), q))
        .filter(|(c, _)| c.is_finite())
        .collect();
    if grid.is_empty() {
        return Err(Error::invalid("collapse needs overlapping curves of at least two sizes"));
    }
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));
    let step = kind.step(xr);
    let mut best: Option<Minimum> = None;
    let mut report = Vec::new();
    for (_, start) in grid.iter().take(3) {
        let m = nelder_mead(obj(samples), start, &step)?;
        report.push(format!(
            "start {start:?}: {:?} cost {:.4e} after {} iterations, converged {}",
            m.params, m.cost, m.iterations, m.converged
        ));
        if m.converged && best.as_ref().is_none_or(|b| m.cost < b.cost) {
            best = Some(m);
        }
    }
    best.ok_or_else(|| Error::NonConvergence(report.join("; ")))
}

/// A fitted parameter with its bootstrap error and 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    pub kind: CollapseKind,
    pub parameters: Vec<Parameter>,
    /// Mean squared normalized residual at the optimum.
    pub quality: f64,
    pub sizes: Vec<usize>,
    /// Points (summary input) or trajectories (trajectory input) per size.
    pub sample_counts: Vec<usize>,
    pub iterations: u64,
    /// Bootstrap replicas whose refit converged.
    pub replicas_used: usize,
}

impl CollapseResult {
    pub fn param(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollapseOptions {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for CollapseOptions {
    fn default() -> Self {
        CollapseOptions { resamples: DEFAULT_RESAMPLES, seed: 0xc011a95e }
    }
}

fn collapse(kind: CollapseKind, data: &CollapseData, opts: &CollapseOptions) -> Result<CollapseResult> {
    let samples = data.samples();
    let (sizes, sample_counts) = data.provenance();
    let min_sizes = kind.min_sizes();
    if sizes.len() < min_sizes {
        return Err(Error::invalid(format!(
            "collapse needs at least {min_sizes} sizes, got {}",
            sizes.len()
        )));
    }
    let best = minimize(kind, &samples)?;
    let xr = x_range(&samples);
    let step = kind.step(xr);
    let replicas: Vec<Vec<f64>> = (0..opts.resamples)
        .into_par_iter()
        .filter_map(|r| {
            let rs = data.replica(opts.seed, r);
            let obj = Objective { kind, samples: &rs, x_range: xr };
            nelder_mead(obj, &best.params, &step)
                .ok()
                .filter(|m| m.converged)
                .map(|m| m.params)
        })
        .collect();
    let parameters = kind
        .names()
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let vals: Vec<f64> = replicas.iter().map(|q| q[k]).collect();
            let b = summarize_replicas(best.params[k], &vals);
            Parameter {
                name: name.to_string(),
                value: b.value,
                stderr: b.stderr,
                lo: b.lo,
                hi: b.hi,
            }
        })
        .collect();
    Ok(CollapseResult {
        kind,
        parameters,
        quality: best.cost,
        sizes,
        sample_counts,
        iterations: best.iterations,
        replicas_used: replicas.len(),
    })
}

/// `(p_c, ν)` from curves at a fixed aspect ratio (`x = p`). Needs ≥ 3 sizes.
pub fn collapse_fit_pc_nu(data: &CollapseData, opts: &CollapseOptions) -> Result<CollapseResult> {
    collapse(CollapseKind::PcNu, data, opts)
}

/// Dynamic exponent from `S(t)` curves at `p_c` (`x = t`).
pub fn collapse_fit_z(data: &CollapseData, opts: &CollapseOptions) -> Result<CollapseResult> {
    collapse(CollapseKind::Z, data, opts)
}

/// `η` from `C(t − t₀)` curves at `p_c` (`x = t − t₀`), assuming `z = 1`.
pub fn collapse_fit_eta(data: &CollapseData, opts: &CollapseOptions) -> Result<CollapseResult> {
    collapse(CollapseKind::Eta, data, opts)
}

/// Where two sizes' curves cross.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub size_a: usize,
    pub size_b: usize,
    pub x: f64,
    pub stderr: f64,
}

fn difference_root(d: &[(f64, f64, f64)]) -> Option<f64> {
    let x: Vec<f64> = d.iter().map(|v| v.0).collect();
    let y: Vec<f64> = d.iter().map(|v| v.1).collect();
    let fit = linear_fit(&x, &y, None).ok()?;
    (fit.slope != 0.0).then(|| -fit.intercept / fit.slope)
}

/// Crossing of two curves sampled at common `x`: a straight-line fit to their
/// difference over the (up to) two points on each side of the first sign
/// change, with a parametric-bootstrap error. `None` if the curves do not cross.
pub fn crossing(a: &[ScalingSample], b: &[ScalingSample], seed: u64) -> Option<Crossing> {
    let mut d: Vec<(f64, f64, f64)> = a
        .iter()
        .filter_map(|p| {
            b.iter()
                .find(|q| q.x == p.x)
                .map(|q| (p.x, p.y - q.y, (p.stderr.powi(2) + q.stderr.powi(2)).sqrt()))
        })
        .collect();
    d.sort_by(|u, v| u.0.total_cmp(&v.0));
    let flip = d.windows(2).position(|w| w[0].1.signum() != w[1].1.signum())?;
    let lo = flip.saturating_sub(1);
    let hi = (flip + 3).min(d.len());
    let local = &d[lo..hi];
    let x = difference_root(local)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reps: Vec<f64> = (0..DEFAULT_RESAMPLES)
        .filter_map(|_| {
            let noisy: Vec<(f64, f64, f64)> = local
                .iter()
                .map(|&(x, y, e)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (x, y + e * z, e)
                })
                .collect();
            difference_root(&noisy)
        })
        .collect();
    let b_est = summarize_replicas(x, &reps);
    Some(Crossing {
        size_a: a.first()?.size,
        size_b: b.first()?.size,
        x,
        stderr: b_est.stderr,
    })
}

/// Crossings of consecutive sizes and their inverse-variance mean.
pub fn crossing_estimate(samples: &[ScalingSample]) -> Result<(Estimate, Vec<Crossing>)> {
    let mut sizes: Vec<usize> = samples.iter().map(|s| s.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let curve = |l: usize| samples.iter().filter(|s| s.size == l).copied().collect::<Vec<_>>();
    let crossings: Vec<Crossing> = sizes
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| crossing(&curve(w[0]), &curve(w[1]), i as u64))
        .collect();
    if crossings.is_empty() {
        return Err(Error::invalid("no pair of curves crosses in the sampled range"));
    }
    let weights: Vec<f64> = crossings
        .iter()
        .map(|c| if c.stderr > 0.0 { 1.0 / (c.stderr * c.stderr) } else { 1.0 })
        .collect();
    let sw: f64 = weights.iter().sum();
    let value = crossings.iter().zip(&weights).map(|(c, w)| c.x * w).sum::<f64>() / sw;
    let stderr = if crossings.iter().all(|c| c.stderr > 0.0) { (1.0 / sw).sqrt() } else { 0.0 };
    Ok((Estimate { value, stderr }, crossings))
}

/// `c_eff` from one restricted fit `f(L) = f∞ − π c/(6L²)` over `L ≥ L_min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeffPoint {
    pub l_min: usize,
    pub c_eff: f64,
    pub stderr: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeffResult {
    /// `c_eff(L_min → ∞)` from `c(L_min) = c∞ + b/L_min²`.
    pub c_inf: BootstrapEstimate,
    pub per_l_min: Vec<CeffPoint>,
    /// `L_min` values dropped for having fewer than three sizes.
    pub skipped: Vec<usize>,
}

fn ceff_fit(rows: &[(usize, f64, f64)], l_min: usize) -> Option<CeffPoint> {
    let pts: Vec<&(usize, f64, f64)> = rows.iter().filter(|r| r.0 >= l_min).collect();
    if pts.len() < 3 {
        return None;
    }
    let x: Vec<f64> = pts.iter().map(|r| 1.0 / (r.0 * r.0) as f64).collect();
    let y: Vec<f64> = pts.iter().map(|r| r.1).collect();
    let s: Vec<f64> = pts.iter().map(|r| r.2).collect();
    let fit = if s.iter().all(|v| *v > 0.0) {
        linear_fit(&x, &y, Some(&s)).ok()?
    } else {
        linear_fit(&x, &y, None).ok()?
    };
    Some(CeffPoint {
        l_min,
        c_eff: -6.0 * fit.slope / PI,
        stderr: 6.0 * fit.slope_se / PI,
        n_points: pts.len(),
    })
}

fn ceff_extrapolate(points: &[CeffPoint]) -> Option<f64> {
    match points.len() {
        0 => None,
        1 => Some(points[0].c_eff),
        _ => {
            let x: Vec<f64> = points.iter().map(|c| 1.0 / (c.l_min * c.l_min) as f64).collect();
            let y: Vec<f64> = points.iter().map(|c| c.c_eff).collect();
            linear_fit(&x, &y, None).ok().map(|f| f.intercept)
        }
    }
}

/// Double fit: `c_eff(L_min)` from each restricted `1/L²` fit, then a linear
/// extrapolation in `1/L_min²`. Errors come from a parametric bootstrap of the
/// `f(L)` values. `rows` are `(L, f, stderr)`.
pub fn ceff_double_fit(rows: &[(usize, f64, f64)], l_mins: &[usize], seed: u64) -> Result<CeffResult> {
    let mut sizes: Vec<usize> = rows.iter().map(|r| r.0).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 4 {
        return Err(Error::invalid(format!("c_eff double fit needs at least 4 sizes, got {}", sizes.len())));
    }
    let mut per_l_min = Vec::new();
    let mut skipped = Vec::new();
    for &l in l_mins {
        match ceff_fit(rows, l) {
            Some(c) => per_l_min.push(c),
            None => skipped.push(l),
        }
    }
    let value = ceff_extrapolate(&per_l_min)
        .ok_or_else(|| Error::invalid("no L_min leaves three or more sizes"))?;
    let valid: Vec<usize> = per_l_min.iter().map(|c| c.l_min).collect();
    let reps: Vec<f64> = (0..DEFAULT_RESAMPLES)
        .into_par_iter()
        .filter_map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let noisy: Vec<(usize, f64, f64)> = rows
                .iter()
                .map(|&(l, f, e)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (l, f + e * z, e)
                })
                .collect();
            let pts: Vec<CeffPoint> = valid.iter().filter_map(|&l| ceff_fit(&noisy, l)).collect();
            ceff_extrapolate(&pts)
        })
        .collect();
    Ok(CeffResult {
        c_inf: summarize_replicas(value, &reps),
        per_l_min,
        skipped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Warn,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub difference: f64,
    pub combined_stderr: f64,
    /// `|x₁^typ − η/2|` in units of the combined error.
    pub sigmas: f64,
    pub verdict: Verdict,
}

/// Checks `x₁^typ = η/2`; warns beyond two combined standard errors, where the
/// error of `η/2` is half that of `η`.
pub fn consistency_x1typ_eta(x1typ: Estimate, eta: Estimate) -> ConsistencyReport {
    let difference = (x1typ.value - eta.value / 2.0).abs();
    let combined_stderr = (x1typ.stderr.powi(2) + (eta.stderr / 2.0).powi(2)).sqrt();
    let sigmas = if difference == 0.0 {
        0.0
    } else if combined_stderr > 0.0 {
        difference / combined_stderr
    } else {
        f64::INFINITY
    };
    ConsistencyReport {
        difference,
        combined_stderr,
        sigmas,
        verdict: if sigmas <= 2.0 { Verdict::Pass } else { Verdict::Warn },
    }
}
