//! Ensemble statistics: moments, mergeable accumulators, least squares and
//! the trajectory bootstrap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resample count used for every bootstrap error bar.
pub const DEFAULT_RESAMPLES: usize = 1000;

/// Mean, spread and standard error of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStat {
    pub mean: f64,
    /// Population variance (divides by `n`).
    pub variance: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl EnsembleStat {
    /// i.i.d. summary: `stderr = √(variance / n)`.
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::invalid("no samples"));
        }
        let m = Moments::from_slice(xs);
        Ok(EnsembleStat {
            mean: m.mean,
            variance: m.variance(),
            stderr: (m.variance() / m.n as f64).sqrt(),
            n_samples: xs.len(),
        })
    }
}

/// Streaming count / mean / second central moment (Welford), mergeable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Moments::default();
        xs.iter().for_each(|&x| m.push(x));
        m
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Mean vector and co-moment matrix of equal-length series, merged with the
/// pairwise update so partial sums combine exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesMoments {
    pub n: u64,
    pub mean: Vec<f64>,
    /// Packed upper triangle of `Σ (x_i − x̄_i)(x_j − x̄_j)`.
    comoment: Vec<f64>,
}

fn tri_index(len: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * len - i * (i + 1) / 2 + j
}

impl SeriesMoments {
    pub fn new(len: usize) -> Self {
        SeriesMoments {
            n: 0,
            mean: vec![0.0; len],
            comoment: vec![0.0; len * (len + 1) / 2],
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn push(&mut self, xs: &[f64]) -> Result<()> {
        let len = self.len();
        if xs.len() != len {
            return Err(Error::invalid(format!("series length {} != {len}", xs.len())));
        }
        self.n += 1;
        let inv = 1.0 / self.n as f64;
        let before: Vec<f64> = xs.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        for (m, d) in self.mean.iter_mut().zip(&before) {
            *m += d * inv;
        }
        let after: Vec<f64> = xs.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        let mut k = 0;
        for i in 0..len {
            for j in i..len {
                self.comoment[k] += before[i] * after[j];
                k += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &SeriesMoments) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::invalid("cannot merge series of different lengths"));
        }
        if other.n == 0 {
            return Ok(());
        }
        if self.n == 0 {
            *self = other.clone();
            return Ok(());
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let d: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let len = self.len();
        let mut k = 0;
        for i in 0..len {
            for j in i..len {
                self.comoment[k] += other.comoment[k] + d[i] * d[j] * na * nb / n;
                k += 1;
            }
        }
        for (m, di) in self.mean.iter_mut().zip(&d) {
            *m += di * nb / n;
        }
        self.n += other.n;
        Ok(())
    }

    /// Population covariance of entries `i` and `j`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.comoment[tri_index(self.len(), i, j)] / self.n as f64
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance(i, i).max(0.0)
    }

    /// Mean and standard error of the linear functional `Σ c_k x_{start+k}`.
    pub fn linear_functional(&self, start: usize, coeffs: &[f64]) -> (f64, f64) {
        let value = coeffs.iter().enumerate().map(|(k, c)| c * self.mean[start + k]).sum();
        let mut var = 0.0;
        for (a, ca) in coeffs.iter().enumerate() {
            for (b, cb) in coeffs.iter().enumerate() {
                var += ca * cb * self.covariance(start + a, start + b);
            }
        }
        (value, (var.max(0.0) / self.n.max(1) as f64).sqrt())
    }
}

/// Straight-line fit `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub intercept_se: f64,
    pub slope_se: f64,
}

/// Least squares; with `sigma`, a χ² fit whose errors come from the known
/// uncertainties, otherwise errors come from the residual scatter.
pub fn linear_fit(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || sigma.is_some_and(|s| s.len() != n) {
        return Err(Error::invalid("mismatched fit inputs"));
    }
    if n < 2 {
        return Err(Error::invalid("a line needs at least two points"));
    }
    let w: Vec<f64> = match sigma {
        Some(s) => {
            if s.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::invalid("fit uncertainties must be positive"));
            }
            s.iter().map(|v| 1.0 / (v * v)).collect()
        }
        None => vec![1.0; n],
    };
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("abscissae are all equal"));
    }
    let sxy: f64 = (0..n).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let scale = match sigma {
        Some(_) => 1.0,
        None if n > 2 => {
            let rss: f64 = (0..n).map(|i| (y[i] - intercept - slope * x[i]).powi(2)).sum();
            rss / (n - 2) as f64
        }
        None => 0.0,
    };
    Ok(LinearFit {
        intercept,
        slope,
        slope_se: (scale / sxx).sqrt(),
        intercept_se: (scale * (1.0 / sw + xm * xm / sxx)).sqrt(),
    })
}

/// Coefficients `c` with `slope = Σ c_i y_i` for an unweighted fit on `x`.
pub fn slope_coefficients(x: &[f64]) -> Vec<f64> {
    let xm = x.iter().sum::<f64>() / x.len() as f64;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    x.iter().map(|v| (v - xm) / sxx).collect()
}

/// Linear-interpolated quantile of sorted data, `q ∈ [0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Point estimate with bootstrap spread and a 95% percentile interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEstimate {
    pub value: f64,
    pub stderr: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Resamples `n` units with replacement `resamples` times; `stat` receives the
/// multiplicity of each unit. Replica `r` uses its own stream, so the result
/// does not depend on the thread count.
pub fn bootstrap<F>(n: usize, resamples: usize, seed: u64, stat: F) -> Vec<f64>
where
    F: Fn(&[u32]) -> f64 + Sync,
{
    (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            stat(&counts)
        })
        .collect()
}

/// Summarizes replicas around `value`; the interval always contains `value`.
pub fn summarize_replicas(value: f64, replicas: &[f64]) -> BootstrapEstimate {
    let mut finite: Vec<f64> = replicas.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.len() < 2 {
        return BootstrapEstimate {
            value,
            stderr: f64::NAN,
            lo: value,
            hi: value,
        };
    }
    finite.sort_by(f64::total_cmp);
    let m = Moments::from_slice(&finite);
    let sd = (m.m2 / (m.n - 1) as f64).sqrt();
    BootstrapEstimate {
        value,
        stderr: sd,
        lo: quantile_sorted(&finite, 0.025).min(value),
        hi: quantile_sorted(&finite, 0.975).max(value),
    }
}

/// Bootstrap of the sample mean.
pub fn bootstrap_mean(xs: &[f64], resamples: usize, seed: u64) -> BootstrapEstimate {
    let value = xs.iter().sum::<f64>() / xs.len() as f64;
    let reps = bootstrap(xs.len(), resamples, seed, |c| {
        c.iter().zip(xs).map(|(&k, x)| k as f64 * x).sum::<f64>() / xs.len() as f64
    });
    summarize_replicas(value, &reps)
}
