//! Shared fixtures for the criterion benches.

use mmdsel_core::{
    coordinate_scores, estimate_covariance, feature_coordinates, generate, resolve_feature_kernels, split_holdout,
    BandwidthRule, Direction, EstimatorSpec, SampleSet, ScreenState, SyntheticKind, SyntheticSpec,
};

/// Paired `d`-dimensional Gaussian samples with every mean of `y` moved by
/// `shift`.
pub fn gaussian_pair(n: usize, d: usize, shift: f64, seed: u64) -> (SampleSet, SampleSet) {
    let spec = SyntheticSpec { kind: SyntheticKind::MeanShift(shift), d, n_true: d, n, seed };
    let data = generate(&spec).expect("valid spec");
    (data.x, data.y)
}

/// A screened state on the default mean-shift model with `d` features.
pub fn screened_state(n: usize, d: usize, k: usize, seed: u64) -> ScreenState {
    let data = generate(&SyntheticSpec { d, n_true: d.min(10), ..SyntheticSpec::mean_shift(n, seed) }).expect("valid spec");
    let (xh, xi) = split_holdout(&data.x, 1.0 / 3.0, seed).expect("split");
    let (yh, yi) = split_holdout(&data.y, 1.0 / 3.0, seed + 1).expect("split");
    let kernels = resolve_feature_kernels(&xi, &yi, BandwidthRule::default(), seed).expect("kernels");
    let est = EstimatorSpec::Incomplete { ratio: 10.0 };
    let z = coordinate_scores(&feature_coordinates(&xi, &yi, &kernels).expect("coords"), est, seed).expect("scores");
    let held = feature_coordinates(&xh, &yh, &kernels).expect("coords");
    let sigma = estimate_covariance(&held, est, xi.len(), seed).expect("covariance");
    ScreenState::select(z, sigma, k, Direction::SelectMax, seed).expect("selection")
}
