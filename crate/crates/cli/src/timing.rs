//! Wall-clock comparison of the estimators on 1-d Gaussian data.

use std::time::Instant;

use mmdsel_core::rng::derive_seed;
use mmdsel_core::{EstimatorSpec, KernelConfig, SampleSet};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::experiments::{estimator_label, ResultRow};

fn gaussian(n: usize, shift: f64, seed: u64) -> SampleSet {
    let v: Vec<f64> = mmdsel_core::rng::seeded(seed)
        .sample_iter::<f64, _>(StandardNormal)
        .take(n)
        .map(|v| v + shift)
        .collect();
    SampleSet::from_scalars(&v).expect("finite draws")
}

/// Median seconds over `reps` runs of `estimator` on `n` paired samples,
/// including construction of the random design for the incomplete
/// estimator. The bandwidth is fixed at 1 so that only the estimator is
/// timed.
pub fn median_runtime(estimator: EstimatorSpec, n: usize, reps: usize, seed: u64) -> Result<f64> {
    let x = gaussian(n, 0.0, derive_seed(seed, 0));
    let y = gaussian(n, 0.5, derive_seed(seed, 1));
    let k = KernelConfig::new(1.0)?;
    let mut times = Vec::with_capacity(reps.max(1));
    for r in 0..reps.max(1) {
        let start = Instant::now();
        let est = estimator.estimate(&x, &y, &k, derive_seed(seed, 2 + r as u64))?;
        times.push(start.elapsed().as_secs_f64());
        std::hint::black_box(est);
    }
    Ok(mmdsel_core::stats::median_in_place(&mut times))
}

/// Least-squares slope of `ln t` against `ln n`.
pub fn loglog_slope(ns: &[usize], times: &[f64]) -> f64 {
    let lx: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let mx = mmdsel_core::stats::mean(&lx);
    let my = mmdsel_core::stats::mean(&ly);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Timing table: one `median_seconds` row per `(estimator, n)` plus one
/// `loglog_slope` row per estimator (reported with `n = 0`).
pub fn bench(n_grid: &[usize], estimators: &[EstimatorSpec], reps: usize, seed: u64) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for e in estimators {
        let label = estimator_label(e);
        let mut times = Vec::with_capacity(n_grid.len());
        for &n in n_grid {
            let t = median_runtime(*e, n, reps, derive_seed(seed, n as u64))?;
            rows.push(ResultRow::new("bench", &label, n, None, "median_seconds", t));
            times.push(t);
        }
        if n_grid.len() >= 2 {
            rows.push(ResultRow::new("bench", &label, 0, None, "loglog_slope", loglog_slope(n_grid, &times)));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let ns = [10, 100, 1000];
        let t: Vec<f64> = ns.iter().map(|&n| 3e-9 * (n as f64).powi(2)).collect();
        assert!((loglog_slope(&ns, &t) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bench_rows() {
        let rows = bench(&[50, 100], &[EstimatorSpec::Linear], 1, 0).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.value.is_finite()));
    }
}
