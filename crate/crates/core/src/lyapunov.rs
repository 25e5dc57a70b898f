//! Free energies of the measurement-record transfer matrix.
//!
//! `F(t) = −⟨ln p_m(t)⟩` is the Shannon entropy of the record because sampled
//! trajectories already carry Born weights, so plain averages over
//! trajectories are Born-weighted averages over records. The paired-state
//! norm `p′_m` gives `F₁`, and `Y = ln p_m − ln p′_m = −ln C^m` feeds the
//! cumulants and the multifractal histogram.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::circuit::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::observables::csv_err;
use crate::stats::{
    bootstrap, linear_fit, quantile_sorted, slope_coefficients, summarize_replicas, Moments,
    SeriesMoments, DEFAULT_RESAMPLES,
};
use crate::weakmeas::DiscreteModel;

/// Fewer points than this in a slope window is an error.
pub const MIN_WINDOW_POINTS: usize = 10;

/// Cumulant groups with fewer samples are flagged and left out of fits.
pub const MIN_CUMULANT_SAMPLES: usize = 100;

/// The `[5L, 32L]` slope window.
pub fn default_window(size: usize) -> (usize, usize) {
    (5 * size, 32 * size)
}

/// Value with a one-sigma error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Ensemble accumulation of `F(t)`, `F₁(t)` and `Y(t)` for one `(L, p, model)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergySeries {
    pub size: usize,
    pub p: f64,
    pub model: DiscreteModel,
    pub n_traj: u64,
    pub n_discarded: u64,
    f: SeriesMoments,
    f1: Option<SeriesMoments>,
    y: Option<SeriesMoments>,
}

impl FreeEnergySeries {
    pub fn new(size: usize, p: f64, model: DiscreteModel, len: usize, paired: bool) -> Self {
        FreeEnergySeries {
            size,
            p,
            model,
            n_traj: 0,
            n_discarded: 0,
            f: SeriesMoments::new(len),
            f1: paired.then(|| SeriesMoments::new(len)),
            y: paired.then(|| SeriesMoments::new(len)),
        }
    }

    /// Accumulates records of one cell. Continuous-outcome models are rejected.
    pub fn from_records(records: &[TrajectoryRecord]) -> Result<Self> {
        let first = records.first().ok_or_else(|| Error::invalid("no records"))?;
        let model = first.model.discrete()?;
        let paired = first.cum_log_born_paired.is_some();
        let len = records
            .iter()
            .filter(|r| !r.discarded)
            .map(|r| r.cum_log_born.len())
            .max()
            .unwrap_or(first.cum_log_born.len());
        let mut s = FreeEnergySeries::new(first.size, first.p, model, len, paired);
        for r in records {
            s.push(r)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, r: &TrajectoryRecord) -> Result<()> {
        if r.size != self.size || r.p != self.p || r.model.discrete()? != self.model {
            return Err(Error::invalid(format!(
                "record (L = {}, p = {}, {}) does not belong to this series",
                r.size, r.p, r.model
            )));
        }
        self.n_traj += 1;
        if r.discarded {
            self.n_discarded += 1;
            return Ok(());
        }
        let f: Vec<f64> = r.cum_log_born.iter().map(|v| -v).collect();
        self.f.push(&f)?;
        if let (Some(acc1), Some(accy)) = (self.f1.as_mut(), self.y.as_mut()) {
            let lp = r
                .cum_log_born_paired
                .as_ref()
                .ok_or_else(|| Error::invalid("paired series missing from record"))?;
            let f1: Vec<f64> = lp.iter().map(|v| -v).collect();
            let y: Vec<f64> = f1.iter().zip(&f).map(|(a, b)| a - b).collect();
            acc1.push(&f1)?;
            accy.push(&y)?;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &FreeEnergySeries) -> Result<()> {
        if (other.size, other.p, other.model) != (self.size, self.p, self.model) {
            return Err(Error::invalid("cannot merge series of different cells"));
        }
        self.f.merge(&other.f)?;
        match (self.f1.as_mut(), other.f1.as_ref()) {
            (Some(a), Some(b)) => a.merge(b)?,
            (None, None) => {}
            _ => return Err(Error::invalid("cannot merge paired with unpaired series")),
        }
        if let (Some(a), Some(b)) = (self.y.as_mut(), other.y.as_ref()) {
            a.merge(b)?;
        }
        self.n_traj += other.n_traj;
        self.n_discarded += other.n_discarded;
        Ok(())
    }

    /// `F(t)`, entry 0 is the initial (zero) value.
    pub fn f_of_t(&self) -> &[f64] {
        &self.f.mean
    }

    pub fn f1_of_t(&self) -> Option<&[f64]> {
        self.f1.as_ref().map(|m| m.mean.as_slice())
    }

    /// Standard error of `F(t)`.
    pub fn f_stderr(&self, t: usize) -> f64 {
        (self.f.variance(t) / self.f.n.max(1) as f64).sqrt()
    }

    pub fn f1_stderr(&self, t: usize) -> Option<f64> {
        self.f1.as_ref().map(|m| (m.variance(t) / m.n.max(1) as f64).sqrt())
    }

    /// Number of trajectories that entered the averages.
    pub fn n_used(&self) -> u64 {
        self.f.n
    }
}

fn window_slope(acc: &SeriesMoments, window: (usize, usize), scale: f64) -> Result<Estimate> {
    let (lo, hi) = window;
    if hi >= acc.len() || lo > hi {
        return Err(Error::invalid(format!(
            "window [{lo}, {hi}] outside the recorded range [0, {}]",
            acc.len().saturating_sub(1)
        )));
    }
    if hi - lo + 1 < MIN_WINDOW_POINTS {
        return Err(Error::invalid(format!(
            "window [{lo}, {hi}] has fewer than {MIN_WINDOW_POINTS} points"
        )));
    }
    if acc.n == 0 {
        return Err(Error::invalid("no trajectories in series"));
    }
    let t: Vec<f64> = (lo..=hi).map(|v| v as f64).collect();
    let (slope, se) = acc.linear_functional(lo, &slope_coefficients(&t));
    Ok(Estimate {
        value: slope / scale,
        stderr: se / scale,
    })
}

/// `f = (dF/dt)/(αL)` from a least-squares slope on `window`. The error is the
/// exact standard error of that slope over the trajectory ensemble.
pub fn free_energy_density(series: &FreeEnergySeries, window: (usize, usize), alpha: f64) -> Result<Estimate> {
    window_slope(&series.f, window, alpha * series.size as f64)
}

/// `f₁` from the paired-state series (discarded trajectories excluded).
pub fn generalized_free_energy_density(
    series: &FreeEnergySeries,
    window: (usize, usize),
    alpha: f64,
) -> Result<Estimate> {
    let f1 = series
        .f1
        .as_ref()
        .ok_or_else(|| Error::invalid("series has no paired-state data"))?;
    window_slope(f1, window, alpha * series.size as f64)
}

/// `k₁/(Lt)` rate: slope of `⟨Y⟩` on the window over `αL`, equal to `f₁ − f`
/// on the same trajectories.
pub fn k1_rate(series: &FreeEnergySeries, window: (usize, usize), alpha: f64) -> Result<Estimate> {
    let y = series
        .y
        .as_ref()
        .ok_or_else(|| Error::invalid("series has no paired-state data"))?;
    window_slope(y, window, alpha * series.size as f64)
}

/// Predicted `f(ε) − f(ε′) = −p ln(ε/ε′)` for bin widths well below Δ: every
/// measured bin probability scales linearly with its width.
pub fn epsilon_shift(eps: f64, eps_prime: f64, p: f64) -> f64 {
    -p * (eps / eps_prime).ln()
}

/// `Y = −ln C^m` of one trajectory at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSample {
    #[serde(rename = "L")]
    pub size: usize,
    pub t: usize,
    pub traj: u64,
    pub y: f64,
}

/// `Y(t)` at the requested times from every non-discarded paired record.
pub fn correlator_samples(records: &[TrajectoryRecord], times: &[usize]) -> Vec<CorrelatorSample> {
    let mut out = Vec::new();
    for r in records.iter().filter(|r| !r.discarded) {
        let Some(lq) = r.cum_log_born_paired.as_ref() else {
            continue;
        };
        for &t in times {
            if let (Some(a), Some(b)) = (r.cum_log_born.get(t), lq.get(t)) {
                out.push(CorrelatorSample {
                    size: r.size,
                    t,
                    traj: r.seed,
                    y: a - b,
                });
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantPoint {
    #[serde(rename = "L")]
    pub size: usize,
    pub t: usize,
    pub n: usize,
    pub k1_over_lt: f64,
    pub k1_stderr: f64,
    pub k2_over_lt: f64,
    pub k2_stderr: f64,
    /// Too few samples; excluded from fits.
    pub flagged: bool,
}

fn group_samples(samples: &[CorrelatorSample]) -> BTreeMap<(usize, usize), Vec<f64>> {
    let mut g: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for s in samples {
        g.entry((s.size, s.t)).or_default().push(s.y);
    }
    g
}

/// `k₁ = ⟨Y⟩`, `k₂ = var Y` per `(L, t)`, divided by `αLt`.
pub fn cumulants(samples: &[CorrelatorSample], alpha: f64) -> Vec<CumulantPoint> {
    group_samples(samples)
        .into_iter()
        .map(|((size, t), ys)| {
            let m = Moments::from_slice(&ys);
            let scale = alpha * (size * t.max(1)) as f64;
            let reps = bootstrap(ys.len(), DEFAULT_RESAMPLES, t as u64, |w| {
                let mut r = Moments::default();
                for (k, y) in w.iter().zip(&ys) {
                    for _ in 0..*k {
                        r.push(*y);
                    }
                }
                r.variance()
            });
            let k2 = summarize_replicas(m.variance(), &reps);
            CumulantPoint {
                size,
                t,
                n: ys.len(),
                k1_over_lt: m.mean / scale,
                k1_stderr: m.stderr() / scale,
                k2_over_lt: m.variance() / scale,
                k2_stderr: k2.stderr / scale,
                flagged: ys.len() < MIN_CUMULANT_SAMPLES,
            }
        })
        .collect()
}

/// Growth rates of `k₁` and `k₂` per unit `αL t` for one size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantRates {
    #[serde(rename = "L")]
    pub size: usize,
    pub k1: Estimate,
    pub k2: Estimate,
    pub n_traj: usize,
}

/// Least-squares slopes of `k₁(t)` and `k₂(t)` over the sampled times, with
/// bootstrap errors over trajectories. Sizes with flagged groups are skipped.
pub fn cumulant_rates(samples: &[CorrelatorSample], alpha: f64) -> Result<Vec<CumulantRates>> {
    let mut by_size: BTreeMap<usize, BTreeMap<u64, BTreeMap<usize, f64>>> = BTreeMap::new();
    for s in samples {
        by_size.entry(s.size).or_default().entry(s.traj).or_default().insert(s.t, s.y);
    }
    let mut out = Vec::new();
    for (size, trajs) in by_size {
        let times: Vec<usize> = {
            let mut all: Vec<usize> = trajs.values().flat_map(|m| m.keys().copied()).collect();
            all.sort_unstable();
            all.dedup();
            all
        };
        // only trajectories observed at every time enter
        let rows: Vec<Vec<f64>> = trajs
            .values()
            .filter(|m| m.len() == times.len())
            .map(|m| times.iter().map(|t| m[t]).collect())
            .collect();
        if times.len() < 2 || rows.len() < MIN_CUMULANT_SAMPLES {
            continue;
        }
        let tx: Vec<f64> = times.iter().map(|&t| t as f64).collect();
        let c = slope_coefficients(&tx);
        let scale = alpha * size as f64;
        let rates = |w: Option<&[u32]>| {
            let mut acc: Vec<Moments> = vec![Moments::default(); times.len()];
            for (i, row) in rows.iter().enumerate() {
                for _ in 0..w.map_or(1, |w| w[i]) {
                    acc.iter_mut().zip(row).for_each(|(m, y)| m.push(*y));
                }
            }
            let k1: f64 = acc.iter().zip(&c).map(|(m, c)| c * m.mean).sum();
            let k2: f64 = acc.iter().zip(&c).map(|(m, c)| c * m.variance()).sum();
            (k1 / scale, k2 / scale)
        };
        let (k1, k2) = rates(None);
        let reps: Vec<(f64, f64)> = {
            let r1 = bootstrap(rows.len(), DEFAULT_RESAMPLES, size as u64, |w| rates(Some(w)).0);
            let r2 = bootstrap(rows.len(), DEFAULT_RESAMPLES, size as u64, |w| rates(Some(w)).1);
            r1.into_iter().zip(r2).collect()
        };
        let (r1, r2): (Vec<f64>, Vec<f64>) = reps.into_iter().unzip();
        out.push(CumulantRates {
            size,
            k1: Estimate {
                value: k1,
                stderr: summarize_replicas(k1, &r1).stderr,
            },
            k2: Estimate {
                value: k2,
                stderr: summarize_replicas(k2, &r2).stderr,
            },
            n_traj: rows.len(),
        });
    }
    Ok(out)
}

/// Scaling dimension from rates `r(L) = r∞ + 2πx/L²`: a weighted fit in `1/L²`.
pub fn scaling_dimension(rates: &[(usize, Estimate)]) -> Result<Estimate> {
    if rates.len() < 2 {
        return Err(Error::invalid("scaling dimension needs at least two sizes"));
    }
    let x: Vec<f64> = rates.iter().map(|(l, _)| 1.0 / (l * l) as f64).collect();
    let y: Vec<f64> = rates.iter().map(|(_, e)| e.value).collect();
    let s: Vec<f64> = rates.iter().map(|(_, e)| e.stderr).collect();
    let fit = if s.iter().all(|v| *v > 0.0) {
        linear_fit(&x, &y, Some(&s))?
    } else {
        linear_fit(&x, &y, None)?
    };
    Ok(Estimate {
        value: fit.slope / (2.0 * PI),
        stderr: fit.slope_se / (2.0 * PI),
    })
}

/// One histogram bin after the `H(s)` transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    #[serde(rename = "L")]
    pub size: usize,
    pub t: usize,
    pub s: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub count: usize,
}

/// `H(s)` for one size, pooled over its sampled times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HCurve {
    pub size: usize,
    pub points: Vec<HPoint>,
    /// Location of the minimum, averaged over times.
    pub s_o: f64,
    /// Spread of the per-time minimum locations.
    pub s_o_spread: f64,
}

/// Freedman–Diaconis width `2·IQR·n^(−1/3)`.
pub fn freedman_diaconis_width(sorted: &[f64]) -> f64 {
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    2.0 * iqr / (sorted.len() as f64).cbrt()
}

/// Vertex of a count-weighted parabola through the central bins (count at
/// least a quarter of the peak).
fn parabola_vertex(points: &[HPoint]) -> Option<(f64, f64)> {
    let peak = points.iter().map(|p| p.count).max()?;
    let core: Vec<&HPoint> = points.iter().filter(|p| 4 * p.count >= peak).collect();
    if core.len() < 3 {
        let best = points.iter().min_by(|a, b| a.h.total_cmp(&b.h))?;
        return Some((best.s, best.h));
    }
    let mut a = Matrix3::<f64>::zeros();
    let mut b = Vector3::<f64>::zeros();
    for p in &core {
        let w = p.count as f64;
        let v = Vector3::new(1.0, p.s, p.s * p.s);
        a += w * v * v.transpose();
        b += w * p.h * v;
    }
    let c = a.lu().solve(&b)?;
    if !(c[2] > 0.0) {
        let best = core.iter().min_by(|a, b| a.h.total_cmp(&b.h))?;
        return Some((best.s, best.h));
    }
    let s0 = -c[1] / (2.0 * c[2]);
    Some((s0, c[0] + c[1] * s0 + c[2] * s0 * s0))
}

/// Histogram collapse `H(s) = −(L/2πt)[ln P(Y) − ½ ln(2πt/L)] − b` with
/// `s = Y/(2πt/L)`. Each `(L, t)` histogram gets its own `b` so that its
/// fitted minimum sits at zero. Empty bins are omitted.
pub fn multifractal_histogram(samples: &[CorrelatorSample]) -> Result<Vec<HCurve>> {
    let mut by_size: BTreeMap<usize, Vec<HPoint>> = BTreeMap::new();
    let mut minima: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
    for ((size, t), mut ys) in group_samples(samples) {
        if ys.len() < MIN_CUMULANT_SAMPLES || t == 0 {
            continue;
        }
        ys.sort_by(f64::total_cmp);
        let width = freedman_diaconis_width(&ys);
        if !(width > 0.0) {
            continue;
        }
        let lo = ys[0];
        let n_bins = (((ys[ys.len() - 1] - lo) / width).floor() as usize) + 1;
        let mut counts = vec![0usize; n_bins];
        for y in &ys {
            counts[(((y - lo) / width) as usize).min(n_bins - 1)] += 1;
        }
        let scale = 2.0 * PI * t as f64 / size as f64;
        let n = ys.len() as f64;
        let mut pts: Vec<HPoint> = counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(i, &c)| {
                let y = lo + (i as f64 + 0.5) * width;
                let prob = c as f64 / (n * width);
                HPoint {
                    size,
                    t,
                    s: y / scale,
                    h: -(prob.ln() - 0.5 * scale.ln()) / scale,
                    count: c,
                }
            })
            .collect();
        let (s0, h0) = parabola_vertex(&pts).ok_or_else(|| Error::invalid("empty histogram"))?;
        pts.iter_mut().for_each(|p| p.h -= h0);
        minima.entry(size).or_default().push((s0, ys.len()));
        by_size.entry(size).or_default().extend(pts);
    }
    if by_size.is_empty() {
        return Err(Error::invalid(format!(
            "no (L, t) group has at least {MIN_CUMULANT_SAMPLES} samples"
        )));
    }
    Ok(by_size
        .into_iter()
        .map(|(size, points)| {
            let m = &minima[&size];
            let mom = Moments::from_slice(&m.iter().map(|(s, _)| *s).collect::<Vec<_>>());
            HCurve {
                size,
                points,
                s_o: mom.mean,
                s_o_spread: mom.variance().sqrt(),
            }
        })
        .collect())
}

/// Row of the `(L, p, f, stderr)` table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyRow {
    #[serde(rename = "L")]
    pub size: usize,
    pub p: f64,
    pub f: f64,
    pub stderr: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{paired_state_trajectory, run_trajectory, CircuitConfig};
    use crate::weakmeas::{Cgpm, Dgpm, MeasurementModel, Spmm};

    fn config(size: usize, p: f64, model: MeasurementModel, t_max: usize) -> CircuitConfig {
        CircuitConfig {
            t_max,
            master_seed: 17,
            ..CircuitConfig::new(size, p, model)
        }
    }

    #[test]
    fn unmeasured_free_energy_is_zero() {
        let c = config(4, 0.0, MeasurementModel::Spmm(Spmm { softening: 0.45 }), 40);
        let recs: Vec<_> = (0..10).map(|i| paired_state_trajectory(&c, i).unwrap()).collect();
        let s = FreeEnergySeries::from_records(&recs).unwrap();
        let f = free_energy_density(&s, (20, 40), 1.0).unwrap();
        assert_eq!(f.value, 0.0);
        let f1 = generalized_free_energy_density(&s, (20, 40), 1.0).unwrap();
        assert!(f1.value.abs() < 1e-12);
    }

    #[test]
    fn continuous_outcomes_are_rejected() {
        let c = config(4, 0.5, MeasurementModel::Cgpm(Cgpm { lambda: 1.0, delta: 1.0 }), 5);
        let recs = vec![run_trajectory(&c, 0, false).unwrap()];
        assert!(matches!(
            FreeEnergySeries::from_records(&recs),
            Err(Error::ContinuousOutcomes(_))
        ));
    }

    #[test]
    fn short_window_is_rejected() {
        let c = config(4, 0.3, MeasurementModel::Projective, 20);
        let recs = vec![run_trajectory(&c, 0, false).unwrap()];
        let s = FreeEnergySeries::from_records(&recs).unwrap();
        assert!(free_energy_density(&s, (5, 13), 1.0).is_err());
        assert!(free_energy_density(&s, (5, 21), 1.0).is_err());
        assert!(free_energy_density(&s, (5, 14), 1.0).is_ok());
    }

    #[test]
    fn free_energy_is_nondecreasing_and_paired_dominates() {
        let c = config(6, 0.3, MeasurementModel::Dgpm(Dgpm::with_strength(1.0)), 60);
        let recs: Vec<_> = (0..60).map(|i| paired_state_trajectory(&c, i).unwrap()).collect();
        let s = FreeEnergySeries::from_records(&recs).unwrap();
        let f = s.f_of_t();
        assert!(f.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let f1 = s.f1_of_t().unwrap();
        for t in 0..f.len() {
            assert!(f1[t] >= f[t] - 1e-9);
        }
        let a = free_energy_density(&s, (20, 60), 1.0).unwrap();
        let b = generalized_free_energy_density(&s, (20, 60), 1.0).unwrap();
        assert!(b.value > a.value);
        let k1 = k1_rate(&s, (20, 60), 1.0).unwrap();
        assert!((k1.value - (b.value - a.value)).abs() < 1e-10);
    }

    #[test]
    fn merge_equals_single_accumulation() {
        let c = config(4, 0.4, MeasurementModel::Spmm(Spmm { softening: 0.45 }), 30);
        let recs: Vec<_> = (0..20).map(|i| paired_state_trajectory(&c, i).unwrap()).collect();
        let whole = FreeEnergySeries::from_records(&recs).unwrap();
        let mut a = FreeEnergySeries::from_records(&recs[..7]).unwrap();
        a.merge(&FreeEnergySeries::from_records(&recs[7..]).unwrap()).unwrap();
        let fa = free_energy_density(&a, (10, 30), 1.0).unwrap();
        let fw = free_energy_density(&whole, (10, 30), 1.0).unwrap();
        assert!((fa.value - fw.value).abs() < 1e-12);
        assert!((fa.stderr - fw.stderr).abs() < 1e-12);
        assert_eq!(a.n_traj, 20);
    }

    #[test]
    fn epsilon_shift_values() {
        assert_eq!(epsilon_shift(0.3, 0.3, 0.19), 0.0);
        assert!((epsilon_shift(0.1, 1.0, 0.19) - 0.4375).abs() < 1e-4);
    }

    fn synthetic(size: usize, t: usize, ys: &[f64]) -> Vec<CorrelatorSample> {
        ys.iter()
            .enumerate()
            .map(|(i, &y)| CorrelatorSample { size, t, traj: i as u64, y })
            .collect()
    }

    #[test]
    fn constant_y_has_zero_k2() {
        let c = cumulants(&synthetic(4, 10, &[1.5; 200]), 1.0);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].k2_over_lt, 0.0);
        assert!((c[0].k1_over_lt - 1.5 / 40.0).abs() < 1e-15);
        assert!(!c[0].flagged);
        assert!(cumulants(&synthetic(4, 10, &[1.0; 50]), 1.0)[0].flagged);
    }

    #[test]
    fn cumulants_are_shift_invariant_in_k2() {
        let ys: Vec<f64> = (0..300).map(|i| ((i * 97) % 31) as f64 * 0.1).collect();
        let shifted: Vec<f64> = ys.iter().map(|y| y + 7.0).collect();
        let a = cumulants(&synthetic(6, 12, &ys), 1.0)[0];
        let b = cumulants(&synthetic(6, 12, &shifted), 1.0)[0];
        assert!((a.k2_over_lt - b.k2_over_lt).abs() < 1e-12);
    }

    #[test]
    fn rates_and_dimension_from_exact_synthetic_growth() {
        // Y = r1(L)·L·t + noise·√(L t) with r1 = 0.01 + 2π·0.14/L²
        let mut samples = Vec::new();
        for &size in &[6usize, 8, 10] {
            let r1 = 0.01 + 2.0 * PI * 0.14 / (size * size) as f64;
            for traj in 0..200u64 {
                for t in [5 * size, 10 * size, 20 * size] {
                    let noise = (((traj * 7919 + t as u64 * 31) % 1000) as f64 / 1000.0 - 0.5) * 1e-3;
                    samples.push(CorrelatorSample {
                        size,
                        t,
                        traj,
                        y: r1 * (size * t) as f64 + noise,
                    });
                }
            }
        }
        let rates = cumulant_rates(&samples, 1.0).unwrap();
        assert_eq!(rates.len(), 3);
        let x = scaling_dimension(&rates.iter().map(|r| (r.size, r.k1)).collect::<Vec<_>>()).unwrap();
        assert!((x.value - 0.14).abs() < 1e-3, "{x:?}");
    }

    #[test]
    fn gaussian_histogram_minimum_at_mean() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let (size, t) = (8usize, 80usize);
        let scale = 2.0 * PI * t as f64 / size as f64;
        let mean = 0.14 * scale;
        let normal = Normal::new(mean, 1.5).unwrap();
        let ys: Vec<f64> = (0..20_000).map(|_| normal.sample(&mut rng)).collect();
        let curves = multifractal_histogram(&synthetic(size, t, &ys)).unwrap();
        assert_eq!(curves.len(), 1);
        assert!((curves[0].s_o - 0.14).abs() < 0.005, "{}", curves[0].s_o);
        let hmin = curves[0].points.iter().map(|p| p.h).fold(f64::INFINITY, f64::min);
        assert!(hmin.abs() < 0.01, "{hmin}");
        assert!(curves[0].points.iter().all(|p| p.count > 0));
    }

    #[test]
    fn fd_width() {
        let v: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert!((freedman_diaconis_width(&v) - 2.0 * 3.5 / 2.0).abs() < 1e-12);
    }
}
