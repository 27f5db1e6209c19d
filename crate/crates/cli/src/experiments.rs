//! Monte-Carlo experiment suites. Every trial draws from its own stream
//! `derive_seed(seed, trial)`, so results do not depend on scheduling.

use mmdsel_core::kernels::resolve_bandwidth;
use mmdsel_core::rng::{derive_seed, seeded};
use mmdsel_core::stats::{self, ks_uniform, quantile};
use mmdsel_core::synthetic::{generate, SyntheticKind, SyntheticSpec};
use mmdsel_core::{
    make_pair_design, mmd_incomplete, BandwidthRule, DesignSpec, EstimatorSpec, KernelConfig,
    SampleSet,
};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;
use crate::pipeline::{feature_psi, positive_rates, sample_select};

/// One line of the long-format results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub estimator: String,
    pub n: usize,
    /// Empty for aggregates.
    pub trial: Option<usize>,
    pub metric: String,
    pub value: f64,
}

impl ResultRow {
    pub fn new(experiment: &str, estimator: &str, n: usize, trial: Option<usize>, metric: &str, value: f64) -> Self {
        Self {
            experiment: experiment.into(),
            estimator: estimator.into(),
            n,
            trial,
            metric: metric.into(),
            value,
        }
    }
}

/// Short label such as `incomplete_r10` or `block_sqrt`.
pub fn estimator_label(e: &EstimatorSpec) -> String {
    match *e {
        EstimatorSpec::Complete => "complete".into(),
        EstimatorSpec::Linear => "linear".into(),
        EstimatorSpec::Block { block_size: None } => "block_sqrt".into(),
        EstimatorSpec::Block { block_size: Some(b) } => format!("block_b{b}"),
        EstimatorSpec::Incomplete { ratio } => format!("incomplete_r{ratio}"),
    }
}

fn normal_set(n: usize, shift: f64, seed: u64) -> SampleSet {
    let v: Vec<f64> = seeded(seed)
        .sample_iter::<f64, _>(StandardNormal)
        .take(n)
        .map(|v| v + shift)
        .collect();
    SampleSet::from_scalars(&v).expect("finite draws")
}

fn median_kernel(x: &SampleSet, y: &SampleSet, seed: u64) -> Result<KernelConfig> {
    let pooled = x.pooled(y)?;
    let bw = resolve_bandwidth(&pooled, BandwidthRule::default(), &mut seeded(seed))?;
    Ok(KernelConfig::new(bw)?)
}

/// Replicate values of one estimator on 1-d Gaussian data: `X ~ N(0, 1)`,
/// `Y ~ N(shift, 1)`, `n` samples each, median-heuristic bandwidth.
pub fn estimator_replicates(estimator: EstimatorSpec, n: usize, shift: f64, trials: usize, seed: u64) -> Result<Vec<f64>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let ts = derive_seed(seed, t as u64);
            let x = normal_set(n, 0.0, derive_seed(ts, 0));
            let y = normal_set(n, shift, derive_seed(ts, 1));
            let k = median_kernel(&x, &y, derive_seed(ts, 2))?;
            Ok(estimator.estimate(&x, &y, &k, derive_seed(ts, 3))?.value)
        })
        .collect()
}

/// Shape summary of replicate values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShapeSummary {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// KS p-value against a normal with the sample mean and variance.
    pub ks_normal_p: f64,
}

pub fn shape_summary(values: &[f64]) -> ShapeSummary {
    let mean = stats::mean(values);
    let variance = stats::sample_variance(values).unwrap_or(f64::NAN);
    let sd = variance.sqrt();
    ShapeSummary {
        mean,
        variance,
        skewness: stats::skewness(values),
        excess_kurtosis: stats::excess_kurtosis(values),
        ks_normal_p: stats::ks_test(values, |v| mmdsel_core::normal::cdf((v - mean) / sd)).p_value,
    }
}

/// Distribution of each estimator at one sample size, under `p = q`
/// (`shift = 0`) or a mean shift.
pub fn normality(estimators: &[EstimatorSpec], n: usize, shift: f64, trials: usize, seed: u64, keep_raw: bool) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for (i, e) in estimators.iter().enumerate() {
        let label = estimator_label(e);
        let values = estimator_replicates(*e, n, shift, trials, derive_seed(seed, i as u64))?;
        if keep_raw {
            rows.extend(values.iter().enumerate().map(|(t, &v)| ResultRow::new("normality", &label, n, Some(t), "value", v)));
        }
        let s = shape_summary(&values);
        for (m, v) in [
            ("mean", s.mean),
            ("variance", s.variance),
            ("skewness", s.skewness),
            ("excess_kurtosis", s.excess_kurtosis),
            ("ks_normal_p", s.ks_normal_p),
        ] {
            rows.push(ResultRow::new("normality", &label, n, None, m, v));
        }
    }
    Ok(rows)
}

/// Variance of the incomplete estimator over redrawn random designs of
/// `num_pairs` pairs on one fixed mean-shifted data set.
pub fn design_variance(n: usize, shift: f64, num_pairs: usize, trials: usize, seed: u64) -> Result<f64> {
    let x = normal_set(n, 0.0, derive_seed(seed, 0));
    let y = normal_set(n, shift, derive_seed(seed, 1));
    let k = median_kernel(&x, &y, derive_seed(seed, 2))?;
    let ratio = num_pairs as f64 / n as f64;
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let design = make_pair_design(n, DesignSpec::Random { ratio }, derive_seed(seed, 1000 + t as u64))?;
            Ok(mmd_incomplete(&x, &y, &k, &design)?.value)
        })
        .collect::<Result<_>>()?;
    Ok(stats::sample_variance(&values).unwrap_or(f64::NAN))
}

/// Averages of one cell of the FPR/TPR experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSummary {
    pub tpr: f64,
    pub fpr: f64,
    pub naive_tpr: f64,
    pub naive_fpr: f64,
}

/// Per-trial `(tpr, fpr, naive_tpr, naive_fpr)`; NaN where undefined.
pub fn fpr_tpr_trials(kind: SyntheticKind, n: usize, cfg: &RunConfig, trials: usize, seed: u64) -> Result<Vec<[f64; 4]>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let ts = derive_seed(seed, t as u64);
            let spec = SyntheticSpec { kind, n, seed: derive_seed(ts, 0), ..SyntheticSpec::mean_shift(n, 0) };
            let data = generate(&spec)?;
            let run = RunConfig { seed: derive_seed(ts, 1), ..*cfg };
            let out = feature_psi(&data.x, &data.y, &run)?;
            let sel = out.state.selected();
            let (tpr, fpr) = positive_rates(&out.flagged(false), sel, &data.true_features);
            let (ntpr, nfpr) = positive_rates(&out.flagged(true), sel, &data.true_features);
            Ok([tpr, fpr, ntpr, nfpr].map(|v| v.unwrap_or(f64::NAN)))
        })
        .collect()
}

fn nan_mean(values: impl Iterator<Item = f64>) -> f64 {
    let kept: Vec<f64> = values.filter(|v| !v.is_nan()).collect();
    if kept.is_empty() {
        f64::NAN
    } else {
        stats::mean(&kept)
    }
}

pub fn summarize_rates(trials: &[[f64; 4]]) -> RateSummary {
    let col = |j: usize| nan_mean(trials.iter().map(|t| t[j]));
    RateSummary { tpr: col(0), fpr: col(1), naive_tpr: col(2), naive_fpr: col(3) }
}

pub const RATE_METRICS: [&str; 4] = ["tpr", "fpr", "naive_tpr", "naive_fpr"];

/// FPR/TPR grid over sample sizes and estimators on the default synthetic
/// model of `kind`.
pub fn fpr_tpr(kind: SyntheticKind, n_grid: &[usize], estimators: &[EstimatorSpec], base: &RunConfig, trials: usize, seed: u64, keep_trials: bool) -> Result<Vec<ResultRow>> {
    let exp = match kind {
        SyntheticKind::MeanShift(_) => "fpr_tpr_mean_shift",
        SyntheticKind::VarianceShift(_) => "fpr_tpr_variance_shift",
        SyntheticKind::Null => "fpr_tpr_null",
    };
    let mut rows = Vec::new();
    for &n in n_grid {
        for e in estimators {
            let label = estimator_label(e);
            let cfg = RunConfig { estimator: *e, ..*base };
            let per = fpr_tpr_trials(kind, n, &cfg, trials, derive_seed(seed, n as u64))?;
            if keep_trials {
                for (t, vals) in per.iter().enumerate() {
                    for (m, v) in RATE_METRICS.iter().zip(vals) {
                        rows.push(ResultRow::new(exp, &label, n, Some(t), m, *v));
                    }
                }
            }
            let s = summarize_rates(&per);
            for (m, v) in RATE_METRICS.iter().zip([s.tpr, s.fpr, s.naive_tpr, s.naive_fpr]) {
                rows.push(ResultRow::new(exp, &label, n, None, m, v));
            }
        }
    }
    Ok(rows)
}

/// Default mean shift of the Type-II experiment: small enough that `n = 100`
/// separates the estimators, large enough that the normal ones saturate by
/// `n = 400`.
pub const TYPE2_SHIFT: f64 = 0.6;

/// Type-II error of a level-`level` test that rejects when the estimate
/// exceeds the empirical `1 − level` quantile of its null replicates.
pub fn type2_error(estimator: EstimatorSpec, n: usize, shift: f64, level: f64, trials: usize, seed: u64) -> Result<f64> {
    let null = estimator_replicates(estimator, n, 0.0, trials, derive_seed(seed, 0))?;
    let threshold = quantile(&null, 1.0 - level);
    let alt = estimator_replicates(estimator, n, shift, trials, derive_seed(seed, 1))?;
    Ok(alt.iter().filter(|&&v| v <= threshold).count() as f64 / trials as f64)
}

pub fn type2(estimators: &[EstimatorSpec], n_grid: &[usize], shift: f64, trials: usize, seed: u64) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &n in n_grid {
        for e in estimators {
            let err = type2_error(*e, n, shift, 0.05, trials, derive_seed(seed, n as u64))?;
            rows.push(ResultRow::new("type2", &estimator_label(e), n, None, "type2_error", err));
        }
    }
    Ok(rows)
}

/// Sample-selection setup with one oracle candidate (fresh draws from the
/// reference distribution) and decoys whose first `shifted` coordinates
/// have their means moved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSetup {
    pub d: usize,
    pub n: usize,
    pub shifted: usize,
    pub decoy_shifts: Vec<f64>,
}

impl Default for OracleSetup {
    fn default() -> Self {
        Self { d: 20, n: 500, shifted: 20, decoy_shifts: vec![0.25, 0.5, 0.75] }
    }
}

/// One oracle p-value per trial, or `None` when a decoy won the selection.
pub fn oracle_pvalues(setup: &OracleSetup, cfg: &RunConfig, trials: usize, seed: u64) -> Result<Vec<Option<f64>>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let ts = derive_seed(seed, t as u64);
            let draw = |stream: u64, shift: f64| -> Result<SampleSet> {
                let spec = SyntheticSpec {
                    kind: SyntheticKind::MeanShift(shift),
                    d: setup.d,
                    n_true: if shift == 0.0 { 0 } else { setup.shifted },
                    n: setup.n,
                    seed: derive_seed(ts, stream),
                };
                Ok(generate(&spec)?.y)
            };
            let reference = draw(0, 0.0)?;
            let mut candidates = vec![draw(1, 0.0)?];
            for (i, &s) in setup.decoy_shifts.iter().enumerate() {
                candidates.push(draw(2 + i as u64, s)?);
            }
            let run = RunConfig { seed: derive_seed(ts, 100), ..*cfg };
            let out = sample_select(&candidates, &reference, &run)?;
            Ok((out.winner() == 0).then(|| out.screen.reported(run.naive)[0].p_value))
        })
        .collect()
}

pub fn pvalue_uniformity(setup: &OracleSetup, cfg: &RunConfig, trials: usize, seed: u64) -> Result<Vec<ResultRow>> {
    let label = estimator_label(&cfg.estimator);
    let ps = oracle_pvalues(setup, cfg, trials, seed)?;
    let mut rows: Vec<ResultRow> = ps
        .iter()
        .enumerate()
        .filter_map(|(t, p)| p.map(|p| ResultRow::new("pvalue_uniformity", &label, setup.n, Some(t), "p_value", p)))
        .collect();
    let won: Vec<f64> = ps.iter().flatten().copied().collect();
    let ks = ks_uniform(&won);
    rows.push(ResultRow::new("pvalue_uniformity", &label, setup.n, None, "oracle_win_rate", won.len() as f64 / trials as f64));
    rows.push(ResultRow::new("pvalue_uniformity", &label, setup.n, None, "ks_statistic", ks.statistic));
    rows.push(ResultRow::new("pvalue_uniformity", &label, setup.n, None, "ks_p_value", ks.p_value));
    Ok(rows)
}
