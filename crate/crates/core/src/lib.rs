//! Kernel two-sample statistics based on incomplete U-statistics, with
//! selection-adjusted p-values for features chosen by marginal screening.
//!
//! The usual flow: build per-feature [`Coordinate`]s, score them with an
//! [`EstimatorSpec`], estimate their covariance on held-out data, pick the
//! top `k` with [`ScreenState::select`], then call
//! [`test_selected_features`].

pub mod error;
pub mod estimators;
pub mod kernels;
pub mod normal;
pub mod rng;
pub mod sample;
pub mod screening;
pub mod selective_inference;
pub mod stats;
pub mod synthetic;

pub use error::{Error, ErrorCategory, Result};
pub use estimators::{
    default_block_size, h_values, make_pair_design, mmd_block, mmd_complete, mmd_incomplete,
    mmd_linear, pair_up, random_pair_count, DesignKind, DesignSpec, EstimateKind, EstimatorSpec,
    MmdEstimate, PairDesign,
};
pub use kernels::{gaussian_kernel, h_kernel, resolve_bandwidth, BandwidthRule, KernelConfig, PairedPoint};
pub use sample::{split_holdout, SampleSet};
pub use screening::{
    coordinate_scores, estimate_covariance, feature_coordinates, per_feature_scores,
    raw_covariance, resolve_feature_kernels, select_top_k, selection_constraints, Coordinate,
    ConstraintRow, Direction, ScreenState, SelectionConstraints,
};
pub use selective_inference::{
    psi_pvalue, test_selected_features, truncation_interval, truncnorm_cdf, Alternative, Eta,
    InferenceMode, PsiResult,
};
pub use synthetic::{generate, SyntheticData, SyntheticKind, SyntheticSpec};
