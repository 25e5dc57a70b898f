//! Trajectory-ensemble averages: half-cut entropy variance, the ancilla order
//! parameter and the two-ancilla mutual-information correlator.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::stats::{bootstrap, summarize_replicas, EnsembleStat, Moments, DEFAULT_RESAMPLES};

/// One row of a time- or rate-resolved ensemble average.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    #[serde(rename = "L")]
    pub size: usize,
    pub p: f64,
    pub t: usize,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// The quasi-stationary window `[L/2, 100]` used for the within-trajectory pool.
pub fn default_var_s_window(size: usize) -> (usize, usize) {
    (size / 2, 100)
}

/// Pooled half-cut entropy samples: `S(2L)` from every trajectory plus every
/// `S(t)` with `t ∈ window`, each sample counted once.
fn var_s_pool(record: &TrajectoryRecord, size: usize, window: (usize, usize)) -> Vec<f64> {
    let Some(s) = record.half_cut_entropy.as_ref() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    if let Some(v) = s.get(2 * size) {
        out.push(*v);
    }
    let hi = window.1.min(s.len().saturating_sub(1));
    if window.0 <= hi {
        out.extend_from_slice(&s[window.0..=hi]);
    }
    out
}

/// Variance of the half-cut entropy over the pooled samples, with a bootstrap
/// (over trajectories) standard error on the variance.
pub fn var_s_ensemble(records: &[TrajectoryRecord], size: usize, window: (usize, usize)) -> Result<EnsembleStat> {
    if window.0 > window.1 {
        return Err(Error::invalid(format!("empty window [{}, {}]", window.0, window.1)));
    }
    let pools: Vec<Moments> = records
        .iter()
        .filter(|r| r.size == size)
        .map(|r| Moments::from_slice(&var_s_pool(r, size, window)))
        .filter(|m| m.n > 0)
        .collect();
    if pools.is_empty() {
        return Err(Error::invalid(format!(
            "no half-cut entropy samples for L = {size} in window [{}, {}]",
            window.0, window.1
        )));
    }
    let combine = |weights: Option<&[u32]>| {
        let mut total = Moments::default();
        for (i, m) in pools.iter().enumerate() {
            for _ in 0..weights.map_or(1, |w| w[i]) {
                total.merge(m);
            }
        }
        total
    };
    let all = combine(None);
    let reps = bootstrap(pools.len(), DEFAULT_RESAMPLES, 0x5eed, |w| combine(Some(w)).variance());
    let b = summarize_replicas(all.variance(), &reps);
    Ok(EnsembleStat {
        mean: all.mean,
        variance: all.variance(),
        stderr: if b.stderr.is_finite() { b.stderr } else { 0.0 },
        n_samples: all.n as usize,
    })
}

/// Records grouped by `(L, p)` in ascending order.
pub fn group_by_cell(records: &[TrajectoryRecord]) -> BTreeMap<(usize, u64), Vec<&TrajectoryRecord>> {
    let mut groups: BTreeMap<(usize, u64), Vec<&TrajectoryRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.size, ordered_bits(r.p))).or_default().push(r);
    }
    groups
}

/// Bit pattern whose integer order matches the float order for `p ≥ 0`.
fn ordered_bits(p: f64) -> u64 {
    p.to_bits()
}

fn series_points<'a, F>(records: &[&'a TrajectoryRecord], pick: F) -> Result<Vec<SeriesPoint>>
where
    F: Fn(&'a TrajectoryRecord) -> Option<&'a Vec<f64>>,
{
    let first = records.first().ok_or_else(|| Error::invalid("empty record group"))?;
    let series: Vec<&Vec<f64>> = records.iter().filter_map(|r| pick(r)).collect();
    if series.is_empty() {
        return Err(Error::invalid(format!(
            "records for L = {}, p = {} lack the requested series",
            first.size, first.p
        )));
    }
    let len = series.iter().map(|s| s.len()).min().unwrap_or(0);
    Ok((0..len)
        .map(|t| {
            let m = Moments::from_slice(&series.iter().map(|s| s[t]).collect::<Vec<_>>());
            SeriesPoint {
                size: first.size,
                p: first.p,
                t,
                mean: m.mean,
                stderr: m.stderr(),
                n: m.n as usize,
            }
        })
        .collect())
}

/// Trajectory-averaged `S_anc(t = 2L)` (bits) for every `(L, p)` cell.
pub fn order_parameter_curves(records: &[TrajectoryRecord]) -> Result<Vec<SeriesPoint>> {
    group_by_cell(records)
        .into_values()
        .map(|group| {
            let size = group[0].size;
            let curve = series_points(&group, |r| r.ancilla_entropy.as_ref())?;
            curve.get(2 * size).copied().ok_or_else(|| {
                Error::invalid(format!("ancilla series for L = {size} stops before t = 2L"))
            })
        })
        .collect()
}

/// Full `S_anc(t)` curves for every `(L, p)` cell.
pub fn ancilla_dynamics(records: &[TrajectoryRecord]) -> Result<Vec<SeriesPoint>> {
    let mut out = Vec::new();
    for group in group_by_cell(records).into_values() {
        out.extend(series_points(&group, |r| r.ancilla_entropy.as_ref())?);
    }
    Ok(out)
}

/// `C(t − t₀)` (nats) averaged per `(L, p)`, with `t` counting from the attachment.
pub fn mutual_info_correlator(records: &[TrajectoryRecord]) -> Result<Vec<SeriesPoint>> {
    let mut out = Vec::new();
    for group in group_by_cell(records).into_values() {
        out.extend(series_points(&group, |r| r.mutual_info.as_ref())?);
    }
    Ok(out)
}

/// Writes rows with columns `L,p,t,mean,stderr,n`.
pub fn write_series_csv(path: &Path, rows: &[SeriesPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{ancilla_order_parameter_protocol, run_trajectory, CircuitConfig};
    use crate::weakmeas::{Cgpm, MeasurementModel};

    fn record(size: usize, p: f64, s: Vec<f64>) -> TrajectoryRecord {
        let mut r = run_trajectory(&CircuitConfig::new(2, 0.0, MeasurementModel::Projective), 0, false).unwrap();
        r.size = size;
        r.p = p;
        r.half_cut_entropy = Some(s);
        r
    }

    #[test]
    fn constant_entropies_have_zero_variance() {
        let recs: Vec<_> = (0..5).map(|_| record(4, 0.1, vec![0.7; 20])).collect();
        let v = var_s_ensemble(&recs, 4, (2, 100)).unwrap();
        assert_eq!(v.variance, 0.0);
        assert_eq!(v.n_samples, 5 * (1 + 18));
    }

    #[test]
    fn two_point_pool_variance() {
        // one sample at t = 2L = 4 per trajectory, window past the end
        let recs = vec![record(2, 0.1, vec![9.0; 4].into_iter().chain([0.0]).collect()),
                        record(2, 0.1, vec![9.0; 4].into_iter().chain([1.0]).collect())];
        let v = var_s_ensemble(&recs, 2, (50, 100)).unwrap();
        assert_eq!(v.variance, 0.25);
        assert!(var_s_ensemble(&recs, 2, (10, 5)).is_err());
        assert!(var_s_ensemble(&recs, 6, (1, 5)).is_err());
    }

    #[test]
    fn unmonitored_variance_is_small() {
        let mut c = CircuitConfig::new(8, 0.0, MeasurementModel::Projective);
        c.t_max = 40;
        let recs: Vec<_> = (0..20).map(|i| run_trajectory(&c, i, true).unwrap()).collect();
        let v = var_s_ensemble(&recs, 8, (20, 40)).unwrap();
        assert!(v.variance < 0.05, "{v:?}");
    }

    #[test]
    fn order_parameter_without_measurement_is_one_bit() {
        let c = CircuitConfig::new(4, 0.0, MeasurementModel::Cgpm(Cgpm { lambda: 1.0, delta: 1.0 }));
        let recs: Vec<_> = (0..5).map(|i| ancilla_order_parameter_protocol(&c, i, false).unwrap()).collect();
        let curves = order_parameter_curves(&recs).unwrap();
        assert_eq!(curves.len(), 1);
        assert!((curves[0].mean - 1.0).abs() < 1e-10);
        assert_eq!(curves[0].t, 8);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows = vec![SeriesPoint { size: 8, p: 0.2, t: 16, mean: 0.5, stderr: 0.01, n: 100 }];
        write_series_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("L,p,t,mean,stderr,n\n8,0.2,16,0.5,0.01,100"));
    }
}
