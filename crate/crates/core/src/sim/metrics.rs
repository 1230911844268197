//! Aggregate statistics over job records.

use serde::{Deserialize, Serialize};

use super::{JobRecord, SimError};
use crate::time::Ticks;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub jobs: usize,
    pub mean_jct: f64,
    pub median_jct: f64,
    pub p80_jct: f64,
    pub makespan: Ticks,
    /// Busy computing-qubit time over capacity × makespan.
    pub utilization: f64,
    pub total_comm_cost: u64,
    pub total_remote_ops: u64,
    pub total_attempts: u64,
    /// `(jct, cumulative fraction)` with equal JCTs merged.
    pub cdf: Vec<(f64, f64)>,
}

/// Sorted `(value, fraction ≤ value)` points, one per distinct value.
pub fn cdf_points(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = frac,
            _ => out.push((x, frac)),
        }
    }
    out
}

/// Smallest value whose cumulative fraction reaches `q`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn compute_metrics(records: &[JobRecord], total_capacity: usize) -> Result<Metrics, SimError> {
    if records.is_empty() {
        return Err(SimError::EmptyRun);
    }
    let jct: Vec<f64> = records.iter().map(|r| r.jct.as_cx()).collect();
    let first = records.iter().map(|r| r.arrival).min().unwrap_or_default();
    let last = records.iter().map(|r| r.completion).max().unwrap_or_default();
    let makespan = last - first;
    let busy: u128 = records.iter().map(|r| r.qubits as u128 * (r.completion - r.start).0 as u128).sum();
    let utilization = if makespan.0 == 0 || total_capacity == 0 {
        0.0
    } else {
        busy as f64 / (total_capacity as f64 * makespan.0 as f64)
    };
    Ok(Metrics {
        jobs: records.len(),
        mean_jct: jct.iter().sum::<f64>() / jct.len() as f64,
        median_jct: median(&jct),
        p80_jct: quantile(&jct, 0.8),
        makespan,
        utilization,
        total_comm_cost: records.iter().map(|r| r.comm_cost).sum(),
        total_remote_ops: records.iter().map(|r| r.remote_ops).sum(),
        total_attempts: records.iter().map(|r| r.attempts).sum(),
        cdf: cdf_points(&jct),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: usize, jct: u64) -> JobRecord {
        JobRecord {
            id,
            name: format!("j{id}"),
            qubits: 10,
            arrival: Ticks(0),
            start: Ticks(0),
            completion: Ticks(jct),
            jct: Ticks(jct),
            remote_ops: 1,
            comm_cost: 2,
            attempts: 3,
            pairs: 3,
        }
    }

    #[test]
    fn cdf_merges_duplicates() {
        assert_eq!(cdf_points(&[1.0, 2.0, 2.0, 4.0]), vec![(1.0, 0.25), (2.0, 0.75), (4.0, 1.0)]);
        assert_eq!(cdf_points(&[16.0]), vec![(16.0, 1.0)]);
    }

    #[test]
    fn summary_values() {
        let m = compute_metrics(&[rec(0, 100), rec(1, 200)], 40).unwrap();
        assert_eq!(m.median_jct, 15.0);
        assert_eq!(m.mean_jct, 15.0);
        assert_eq!(m.p80_jct, 20.0);
        assert_eq!(m.total_remote_ops, 2);
        // (10·100 + 10·200) / (40 · 200)
        assert!((m.utilization - 3000.0 / 8000.0).abs() < 1e-12);
        let one = compute_metrics(&[rec(0, 160)], 20).unwrap();
        assert_eq!(one.cdf, vec![(16.0, 1.0)]);
        assert!(matches!(compute_metrics(&[], 10), Err(SimError::EmptyRun)));
    }

    #[test]
    fn quantiles() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(quantile(&v, 0.8), 4.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(median(&v), 3.0);
    }
}
