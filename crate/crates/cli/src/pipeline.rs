//! The two end-to-end analyses: feature screening with selective tests, and
//! picking the candidate sample set closest to a reference.

use mmdsel_core::kernels::resolve_bandwidth;
use mmdsel_core::rng::{derive_seed, seeded};
use mmdsel_core::screening::coordinate_scores;
use mmdsel_core::{
    estimate_covariance, feature_coordinates, pair_up, resolve_feature_kernels, split_holdout,
    test_selected_features, Coordinate, Direction, Error, InferenceMode, KernelConfig, PsiResult,
    SampleSet, ScreenState,
};
use nalgebra::DMatrix;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

// Seed streams derived from `RunConfig::seed`.
pub const STREAM_PAIR: u64 = 0;
pub const STREAM_SPLIT_X: u64 = 1;
pub const STREAM_SPLIT_Y: u64 = 2;
pub const STREAM_KERNEL: u64 = 3;
pub const STREAM_DESIGN: u64 = 4;
pub const STREAM_COVARIANCE: u64 = 5;
pub const STREAM_CANDIDATES: u64 = 6;

/// Scores, selection and both flavours of p-values for one screening run.
#[derive(Debug, Clone)]
pub struct ScreenOutcome {
    pub n_inference: usize,
    pub n_held_out: usize,
    pub bandwidths: Vec<f64>,
    pub state: ScreenState,
    /// One entry per selected coordinate, in `state.selected()` order.
    pub selective: Vec<PsiResult>,
    pub naive: Vec<PsiResult>,
}

impl ScreenOutcome {
    /// Results in the mode chosen by the config.
    pub fn reported(&self, naive: bool) -> &[PsiResult] {
        if naive {
            &self.naive
        } else {
            &self.selective
        }
    }

    /// Indices flagged significant in the chosen mode.
    pub fn flagged(&self, naive: bool) -> Vec<usize> {
        self.state
            .selected()
            .iter()
            .zip(self.reported(naive))
            .filter(|(_, r)| r.significant == Some(true))
            .map(|(&s, _)| s)
            .collect()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        self.state.sigma()
    }
}

fn screen(
    inference: &[Coordinate],
    held_out: &[Coordinate],
    cfg: &RunConfig,
    k: usize,
    direction: Direction,
) -> Result<(ScreenState, Vec<PsiResult>, Vec<PsiResult>)> {
    let n_inf = inference[0].len();
    let design_seed = derive_seed(cfg.seed, STREAM_DESIGN);
    let z = coordinate_scores(inference, cfg.estimator, design_seed)?;
    let sigma = estimate_covariance(held_out, cfg.estimator, n_inf, derive_seed(cfg.seed, STREAM_COVARIANCE))?;
    let state = ScreenState::select(z, sigma, k, direction, design_seed)?;
    let selective = test_selected_features(&state, cfg.alpha, cfg.alternative, InferenceMode::Selective)?;
    let naive = test_selected_features(&state, cfg.alpha, cfg.alternative, InferenceMode::Naive)?;
    Ok((state, selective, naive))
}

/// Pairs `x` and `y`, splits off `cov_fraction` of each for the covariance,
/// scores every feature on the rest, selects the top `k` and tests them.
pub fn feature_psi(x: &SampleSet, y: &SampleSet, cfg: &RunConfig) -> Result<ScreenOutcome> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() }.into());
    }
    if x.dim() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, found: x.dim() }.into());
    }
    if cfg.k >= x.dim() {
        return Err(CliError::Config(format!("--k = {} must be below the feature count {}", cfg.k, x.dim())));
    }
    let (x, y) = pair_up(x, y, derive_seed(cfg.seed, STREAM_PAIR))?;
    let (x_hold, x_inf) = split_holdout(&x, cfg.cov_fraction, derive_seed(cfg.seed, STREAM_SPLIT_X))?;
    let (y_hold, y_inf) = split_holdout(&y, cfg.cov_fraction, derive_seed(cfg.seed, STREAM_SPLIT_Y))?;
    let kernels = resolve_feature_kernels(&x_inf, &y_inf, cfg.bandwidth, derive_seed(cfg.seed, STREAM_KERNEL))?;
    let inference = feature_coordinates(&x_inf, &y_inf, &kernels)?;
    let held_out = feature_coordinates(&x_hold, &y_hold, &kernels)?;
    let (state, selective, naive) = screen(&inference, &held_out, cfg, cfg.k, Direction::SelectMax)?;
    Ok(ScreenOutcome {
        n_inference: x_inf.len(),
        n_held_out: x_hold.len(),
        bandwidths: kernels.iter().map(KernelConfig::bandwidth).collect(),
        state,
        selective,
        naive,
    })
}

/// Outcome of [`sample_select`].
#[derive(Debug, Clone)]
pub struct SelectOutcome {
    pub screen: ScreenOutcome,
    /// Candidate indices sorted by ascending score.
    pub ranking: Vec<usize>,
    /// The runner-up is within one standard deviation of the winner's lead.
    pub near_tie: bool,
}

impl SelectOutcome {
    pub fn winner(&self) -> usize {
        self.screen.state.selected()[0]
    }
}

/// Treats the MMD of each candidate to `reference` as one coordinate, picks
/// the smallest and tests it. All sets are cut to the smallest size after a
/// seeded shuffle; one kernel, resolved on the reference, serves every
/// candidate.
pub fn sample_select(candidates: &[SampleSet], reference: &SampleSet, cfg: &RunConfig) -> Result<SelectOutcome> {
    if candidates.len() < 2 {
        return Err(CliError::Config(format!("need at least 2 candidates, got {}", candidates.len())));
    }
    for c in candidates {
        if c.dim() != reference.dim() {
            return Err(Error::DimensionMismatch { expected: reference.dim(), found: c.dim() }.into());
        }
    }
    let n = candidates.iter().map(SampleSet::len).min().unwrap_or(0).min(reference.len());
    let cut = |s: &SampleSet| s.shuffled(derive_seed(cfg.seed, STREAM_CANDIDATES)).truncated(n);
    let split_seed = derive_seed(cfg.seed, STREAM_SPLIT_X);
    let (ref_hold, ref_inf) = split_holdout(&cut(reference), cfg.cov_fraction, derive_seed(cfg.seed, STREAM_SPLIT_Y))?;
    let mut g = seeded(derive_seed(cfg.seed, STREAM_KERNEL));
    let kernel = KernelConfig::new(resolve_bandwidth(&ref_inf, cfg.bandwidth, &mut g)?)?;

    let mut inference = Vec::with_capacity(candidates.len());
    let mut held_out = Vec::with_capacity(candidates.len());
    for c in candidates {
        let (hold, inf) = split_holdout(&cut(c), cfg.cov_fraction, split_seed)?;
        inference.push(Coordinate::new(inf, ref_inf.clone(), kernel)?);
        held_out.push(Coordinate::new(hold, ref_hold.clone(), kernel)?);
    }
    let (state, selective, naive) = screen(&inference, &held_out, cfg, 1, Direction::SelectMin)?;

    let z = state.z();
    let mut ranking: Vec<usize> = (0..z.len()).collect();
    ranking.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
    let (best, second) = (ranking[0], ranking[1]);
    let s = state.sigma();
    let gap_var = (s[(best, best)] + s[(second, second)] - 2.0 * s[(best, second)]).max(0.0);
    let near_tie = z[second] - z[best] <= gap_var.sqrt();

    Ok(SelectOutcome {
        screen: ScreenOutcome {
            n_inference: ref_inf.len(),
            n_held_out: ref_hold.len(),
            bandwidths: vec![kernel.bandwidth()],
            state,
            selective,
            naive,
        },
        ranking,
        near_tie,
    })
}

/// True- and false-positive rates of one run against known true features.
///
/// TPR = flagged true / |true|; FPR = flagged null / (k − selected true).
/// Either is `None` when its denominator is zero.
pub fn positive_rates(flagged: &[usize], selected: &[usize], true_features: &[usize]) -> (Option<f64>, Option<f64>) {
    let is_true = |f: &usize| true_features.contains(f);
    let hits = flagged.iter().filter(|f| is_true(f)).count();
    let false_hits = flagged.len() - hits;
    let selected_true = selected.iter().filter(|f| is_true(f)).count();
    let nulls_selected = selected.len() - selected_true;
    let tpr = (!true_features.is_empty()).then(|| hits as f64 / true_features.len() as f64);
    let fpr = (nulls_selected > 0).then(|| false_hits as f64 / nulls_selected as f64);
    (tpr, fpr)
}
