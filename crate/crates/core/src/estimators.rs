//! Empirical MMD² estimators.
//!
//! * [`mmd_complete`]: the complete U-statistic, `O(n²)`; degenerate under
//!   the null, so it carries no variance estimate.
//! * [`mmd_block`]: mean of complete U-statistics over disjoint blocks.
//! * [`mmd_incomplete`]: mean of `h(u_i, u_j)` over a pair design `D`.
//! * [`mmd_linear`]: the incomplete estimator on the disjoint consecutive
//!   design `{(0,1), (2,3), ...}`.
//!
//! The `h`-based estimators use the paired construction `u_i = [x_i; y_i]`
//! and therefore need `m == n`; see [`pair_up`].

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{h_unchecked, KernelConfig};
use crate::rng;
use crate::sample::SampleSet;
use crate::stats::{self, CompensatedSum};

/// Which estimator produced an [`MmdEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EstimateKind {
    Complete,
    Block { block_size: usize },
    Linear,
    Incomplete { num_pairs: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdEstimate {
    pub kind: EstimateKind,
    pub value: f64,
    /// Number of `h` terms (or blocks) averaged into `value`.
    pub num_terms: usize,
    /// Estimated variance of `value` itself (already divided by the term
    /// count).
    pub variance: Option<f64>,
}

/// Estimator choice at the configuration level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EstimatorSpec {
    Complete,
    /// `block_size: None` means `B = round(√n)`.
    Block { block_size: Option<usize> },
    Linear,
    /// `ℓ = round(ratio · n)` pairs drawn with replacement.
    Incomplete { ratio: f64 },
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::Complete => "complete",
            EstimatorSpec::Block { .. } => "block",
            EstimatorSpec::Linear => "linear",
            EstimatorSpec::Incomplete { .. } => "incomplete",
        }
    }

    /// Block size used for `n` samples.
    pub fn block_size_for(&self, n: usize) -> Option<usize> {
        match *self {
            EstimatorSpec::Block { block_size } => {
                Some(block_size.unwrap_or_else(|| default_block_size(n)))
            }
            _ => None,
        }
    }

    /// The pair design this estimator averages over, for estimators that
    /// are a plain mean of `h` terms.
    pub fn design_spec(&self) -> Option<DesignSpec> {
        match *self {
            EstimatorSpec::Linear => Some(DesignSpec::Linear),
            EstimatorSpec::Incomplete { ratio } => Some(DesignSpec::Random { ratio }),
            _ => None,
        }
    }

    /// Runs the estimator on paired data. `design_seed` drives the random
    /// design of the incomplete estimator and is ignored otherwise.
    pub fn estimate(
        &self,
        x: &SampleSet,
        y: &SampleSet,
        cfg: &KernelConfig,
        design_seed: u64,
    ) -> Result<MmdEstimate> {
        match *self {
            EstimatorSpec::Complete => mmd_complete(x, y, cfg),
            EstimatorSpec::Block { .. } => {
                let b = self.block_size_for(x.len()).unwrap_or(2);
                mmd_block(x, y, cfg, b)
            }
            EstimatorSpec::Linear => mmd_linear(x, y, cfg),
            EstimatorSpec::Incomplete { ratio } => {
                let design = make_pair_design(x.len(), DesignSpec::Random { ratio }, design_seed)?;
                mmd_incomplete(x, y, cfg, &design)
            }
        }
    }
}

/// `round(√n)`, at least 2.
pub fn default_block_size(n: usize) -> usize {
    ((n as f64).sqrt().round() as usize).max(2)
}

fn check_same_dim(x: &SampleSet, y: &SampleSet) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

/// Complete U-statistic.
///
/// For `m = n` this is the mean of `h(u_i, u_j)` over all `i ≠ j`, i.e. the
/// cross term skips `k(x_i, y_i)`. For `m != n` there is no pairing and the
/// cross term runs over every `(i, j)`:
///
/// ```text
/// 1/(m(m-1)) Σ_{i≠j} k(x_i,x_j) + 1/(n(n-1)) Σ_{i≠j} k(y_i,y_j) - 2/(mn) Σ_{i,j} k(x_i,y_j)
/// ```
pub fn mmd_complete(x: &SampleSet, y: &SampleSet, cfg: &KernelConfig) -> Result<MmdEstimate> {
    check_same_dim(x, y)?;
    for s in [x, y] {
        if s.len() < 2 {
            return Err(Error::InsufficientSamples { needed: 2, found: s.len() });
        }
    }
    let value = complete_on(x, 0..x.len(), y, 0..y.len(), cfg);
    Ok(MmdEstimate {
        kind: EstimateKind::Complete,
        value,
        num_terms: x.len() * (x.len() - 1),
        variance: None,
    })
}

fn within_mean(s: &SampleSet, r: Range<usize>, cfg: &KernelConfig) -> f64 {
    let n = r.len();
    let mut acc = CompensatedSum::new();
    for i in r.clone() {
        let mut row = CompensatedSum::new();
        let si = s.sample(i);
        for j in (i + 1)..r.end {
            row.add(cfg.eval(si, s.sample(j)));
        }
        acc.add(row.value());
    }
    2.0 * acc.value() / (n * (n - 1)) as f64
}

fn complete_on(
    x: &SampleSet,
    xr: Range<usize>,
    y: &SampleSet,
    yr: Range<usize>,
    cfg: &KernelConfig,
) -> f64 {
    let kxx = within_mean(x, xr.clone(), cfg);
    let kyy = within_mean(y, yr.clone(), cfg);
    let paired = xr.len() == yr.len();
    let mut cross = CompensatedSum::new();
    for (a, i) in xr.clone().enumerate() {
        let xi = x.sample(i);
        let mut row = CompensatedSum::new();
        for (b, j) in yr.clone().enumerate() {
            if !(paired && a == b) {
                row.add(cfg.eval(xi, y.sample(j)));
            }
        }
        cross.add(row.value());
    }
    let terms = if paired { xr.len() * (xr.len() - 1) } else { xr.len() * yr.len() };
    let kxy = cross.value() / terms as f64;
    kxx + kyy - 2.0 * kxy
}

/// Block estimator: the mean of [`mmd_complete`] over `⌊n / B⌋` disjoint
/// consecutive blocks of `B` paired samples. Trailing samples that do not
/// fill a block are dropped.
pub fn mmd_block(
    x: &SampleSet,
    y: &SampleSet,
    cfg: &KernelConfig,
    block_size: usize,
) -> Result<MmdEstimate> {
    check_same_dim(x, y)?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let n = x.len();
    if block_size < 2 {
        return Err(Error::InvalidConfig(format!(
            "block size must be at least 2, got {block_size}"
        )));
    }
    if block_size > n {
        return Err(Error::InvalidConfig(format!(
            "block size {block_size} exceeds sample count {n}"
        )));
    }
    let blocks = block_values(x, y, cfg, block_size);
    if !n.is_multiple_of(block_size) {
        log::warn!(
            "block estimator: dropping {} trailing samples (n = {n}, B = {block_size})",
            n % block_size
        );
    }
    let num_blocks = blocks.len();
    Ok(MmdEstimate {
        kind: EstimateKind::Block { block_size },
        value: stats::mean(&blocks),
        num_terms: num_blocks,
        variance: stats::sample_variance(&blocks).map(|v| v / num_blocks as f64),
    })
}

/// Per-block complete estimates over consecutive blocks of `block_size`.
pub(crate) fn block_values(
    x: &SampleSet,
    y: &SampleSet,
    cfg: &KernelConfig,
    block_size: usize,
) -> Vec<f64> {
    (0..x.len() / block_size)
        .map(|b| {
            let r = b * block_size..(b + 1) * block_size;
            complete_on(x, r.clone(), y, r, cfg)
        })
        .collect()
}

/// How to build a [`PairDesign`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DesignSpec {
    Complete,
    Linear,
    /// `round(ratio · n)` (at least one) ordered pairs, i.i.d. uniform over
    /// `i != j`.
    Random { ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DesignKind {
    Complete,
    Linear,
    RandomWithReplacement { seed: u64 },
}

/// An ordered multiset of index pairs `(i, j)`, `i != j`, over `n` samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairDesign {
    pairs: Vec<(usize, usize)>,
    n: usize,
    kind: DesignKind,
}

impl PairDesign {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `num_pairs` ordered pairs drawn i.i.d. uniformly from all `i != j`.
    pub fn random(n: usize, num_pairs: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InsufficientSamples { needed: 2, found: n });
        }
        let mut g = rng::seeded(seed);
        let pairs = (0..num_pairs)
            .map(|_| {
                let i = g.random_range(0..n);
                let mut j = g.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (i, j)
            })
            .collect();
        Ok(Self {
            pairs,
            n,
            kind: DesignKind::RandomWithReplacement { seed },
        })
    }

    /// A design from explicit pairs; every pair must satisfy `i != j < n`.
    pub fn from_pairs(n: usize, pairs: Vec<(usize, usize)>, kind: DesignKind) -> Result<Self> {
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i == j || i >= n || j >= n) {
            return Err(Error::InvalidDesign(format!("pair ({i}, {j}) invalid for n = {n}")));
        }
        Ok(Self { pairs, n, kind })
    }
}

/// Number of random pairs for ratio `r`: `round(r · n)`, at least one.
pub fn random_pair_count(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).round() as usize).max(1)
}

pub fn make_pair_design(n: usize, spec: DesignSpec, seed: u64) -> Result<PairDesign> {
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, found: n });
    }
    match spec {
        DesignSpec::Complete => {
            let mut pairs = Vec::with_capacity(n * (n - 1));
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        pairs.push((i, j));
                    }
                }
            }
            Ok(PairDesign { pairs, n, kind: DesignKind::Complete })
        }
        DesignSpec::Linear => {
            if !n.is_multiple_of(2) {
                return Err(Error::InvalidDesign(format!(
                    "linear design needs an even sample count, got {n}"
                )));
            }
            let pairs = (0..n / 2).map(|t| (2 * t, 2 * t + 1)).collect();
            Ok(PairDesign { pairs, n, kind: DesignKind::Linear })
        }
        DesignSpec::Random { ratio } => {
            if !(ratio.is_finite() && ratio > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "pair ratio must be finite and positive, got {ratio}"
                )));
            }
            PairDesign::random(n, random_pair_count(n, ratio), seed)
        }
    }
}

fn check_paired(x: &SampleSet, y: &SampleSet, design: &PairDesign) -> Result<()> {
    check_same_dim(x, y)?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if design.n() != x.len() {
        return Err(Error::InvalidDesign(format!(
            "design built for n = {} applied to {} samples",
            design.n(),
            x.len()
        )));
    }
    Ok(())
}

/// `h(u_i, u_j)` for every pair of the design, in design order.
pub fn h_values(
    x: &SampleSet,
    y: &SampleSet,
    cfg: &KernelConfig,
    design: &PairDesign,
) -> Result<Vec<f64>> {
    check_paired(x, y, design)?;
    Ok(design
        .pairs()
        .iter()
        .map(|&(i, j)| h_unchecked(x.sample(i), y.sample(i), x.sample(j), y.sample(j), cfg))
        .collect())
}

/// Incomplete U-statistic: mean of `h` over the design, with variance
/// `s²(h) / ℓ`.
pub fn mmd_incomplete(
    x: &SampleSet,
    y: &SampleSet,
    cfg: &KernelConfig,
    design: &PairDesign,
) -> Result<MmdEstimate> {
    if design.is_empty() {
        return Err(Error::InvalidDesign("empty pair design".into()));
    }
    let h = h_values(x, y, cfg, design)?;
    let kind = match design.kind() {
        DesignKind::Linear => EstimateKind::Linear,
        _ => EstimateKind::Incomplete { num_pairs: h.len() },
    };
    Ok(MmdEstimate {
        kind,
        value: stats::mean(&h),
        num_terms: h.len(),
        variance: stats::sample_variance(&h).map(|v| v / h.len() as f64),
    })
}

/// Linear-time estimator. An odd trailing sample is dropped.
pub fn mmd_linear(x: &SampleSet, y: &SampleSet, cfg: &KernelConfig) -> Result<MmdEstimate> {
    check_same_dim(x, y)?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, found: n });
    }
    if n % 2 == 1 {
        log::warn!("linear estimator: dropping the last of {n} samples");
        let (x, y) = (x.truncated(n - 1), y.truncated(n - 1));
        let design = make_pair_design(n - 1, DesignSpec::Linear, 0)?;
        return mmd_incomplete(&x, &y, cfg, &design);
    }
    let design = make_pair_design(n, DesignSpec::Linear, 0)?;
    mmd_incomplete(x, y, cfg, &design)
}

/// Brings `x` and `y` to a common sample count for the paired construction.
/// When the counts differ, each set is shuffled (seeded) and both are cut to
/// `min(m, n)`.
pub fn pair_up(x: &SampleSet, y: &SampleSet, seed: u64) -> Result<(SampleSet, SampleSet)> {
    check_same_dim(x, y)?;
    if x.len() == y.len() {
        return Ok((x.clone(), y.clone()));
    }
    let n = x.len().min(y.len());
    log::warn!(
        "paired construction: truncating to {n} samples per side (had {} and {})",
        x.len(),
        y.len()
    );
    let mut g = rng::seeded(seed);
    let mut cut = |s: &SampleSet| {
        let mut idx: Vec<usize> = (0..s.len()).collect();
        idx.shuffle(&mut g);
        idx.truncate(n);
        s.select(&idx)
    };
    let xs = cut(x);
    let ys = cut(y);
    Ok((xs, ys))
}
