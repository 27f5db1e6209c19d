//! Marginal screening: per-coordinate MMD scores, their covariance, top-k
//! selection, and the selection event as linear constraints `A z ≤ 0`.
//!
//! A *coordinate* is one entry of the score vector `z`. For feature
//! screening it is one feature slice of paired `(X, Y)`; for sample
//! selection it is one candidate set compared against a shared reference.
//! Every coordinate must hold the same number of paired samples so that a
//! single pair design can be shared across them, which is what makes the
//! cross-coordinate covariance meaningful.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    block_values, h_values, make_pair_design, mmd_block, random_pair_count, DesignSpec,
    EstimatorSpec, PairDesign,
};
use crate::kernels::{resolve_bandwidth, BandwidthRule, KernelConfig};
use crate::rng;
use crate::sample::SampleSet;
use crate::stats::{self, CompensatedSum};

/// Pair ratio of the random design used to estimate `Cov(h)` for the linear
/// estimator on the held-out split.
pub const LINEAR_COVARIANCE_RATIO: f64 = 10.0;

/// Minimum number of block vectors gathered (over random re-partitions of
/// the held-out split) when estimating the block estimator's covariance.
pub const MIN_BLOCK_DRAWS: usize = 200;

/// Maximum number of random re-partitions for the block covariance.
pub const MAX_BLOCK_PARTITIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    SelectMax,
    SelectMin,
}

/// One coordinate of the score vector: paired samples and the kernel used
/// on them.
#[derive(Debug, Clone)]
pub struct Coordinate {
    pub x: SampleSet,
    pub y: SampleSet,
    pub kernel: KernelConfig,
}

impl Coordinate {
    pub fn new(x: SampleSet, y: SampleSet, kernel: KernelConfig) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                found: y.dim(),
            });
        }
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        Ok(Self { x, y, kernel })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

fn common_len(coords: &[Coordinate]) -> Result<usize> {
    let n = coords
        .first()
        .map(Coordinate::len)
        .ok_or_else(|| Error::InvalidConfig("no coordinates to score".into()))?;
    if let Some(c) = coords.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c.len(),
        });
    }
    Ok(n)
}

/// Resolves one kernel per feature from the pooled one-dimensional slice of
/// `x ∪ y`. Feature `f` draws from the stream `derive_seed(seed, f)`.
pub fn resolve_feature_kernels(
    x: &SampleSet,
    y: &SampleSet,
    rule: BandwidthRule,
    seed: u64,
) -> Result<Vec<KernelConfig>> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    (0..x.dim())
        .map(|f| {
            let pooled = x.feature(f).pooled(&y.feature(f))?;
            let mut g = rng::seeded(rng::derive_seed(seed, f as u64));
            KernelConfig::new(resolve_bandwidth(&pooled, rule, &mut g)?)
        })
        .collect()
}

/// Splits paired `(x, y)` into one coordinate per feature.
pub fn feature_coordinates(
    x: &SampleSet,
    y: &SampleSet,
    kernels: &[KernelConfig],
) -> Result<Vec<Coordinate>> {
    if kernels.len() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: kernels.len(),
        });
    }
    (0..x.dim())
        .map(|f| Coordinate::new(x.feature(f), y.feature(f), kernels[f]))
        .collect()
}

/// Scores every coordinate with `estimator`. The incomplete estimator uses
/// one random design (from `design_seed`) shared by all coordinates.
pub fn coordinate_scores(
    coords: &[Coordinate],
    estimator: EstimatorSpec,
    design_seed: u64,
) -> Result<Vec<f64>> {
    let n = common_len(coords)?;
    match estimator {
        EstimatorSpec::Complete | EstimatorSpec::Linear => coords
            .iter()
            .map(|c| Ok(estimator.estimate(&c.x, &c.y, &c.kernel, design_seed)?.value))
            .collect(),
        EstimatorSpec::Block { .. } => {
            let b = estimator.block_size_for(n).unwrap_or(2);
            coords
                .iter()
                .map(|c| Ok(mmd_block(&c.x, &c.y, &c.kernel, b)?.value))
                .collect()
        }
        EstimatorSpec::Incomplete { ratio } => {
            let design = make_pair_design(n, DesignSpec::Random { ratio }, design_seed)?;
            coords
                .iter()
                .map(|c| Ok(stats::mean(&h_values(&c.x, &c.y, &c.kernel, &design)?)))
                .collect()
        }
    }
}

/// Per-feature scores `z_f` of paired `(x, y)`.
pub fn per_feature_scores(
    x: &SampleSet,
    y: &SampleSet,
    kernels: &[KernelConfig],
    estimator: EstimatorSpec,
    design_seed: u64,
) -> Result<Vec<f64>> {
    coordinate_scores(&feature_coordinates(x, y, kernels)?, estimator, design_seed)
}

/// Covariance of the score vector before ridging, estimated on held-out
/// coordinates for an inference split of `n_inference` paired samples.
///
/// * incomplete(r): sample covariance of the per-pair `h` vectors over one
///   shared random design on the held-out split, divided by
///   `ℓ = round(r · n_inference)`;
/// * linear: the same with a ratio-10 random design, divided by
///   `⌊n_inference / 2⌋`;
/// * block(B): sample covariance of per-block estimate vectors gathered over
///   random re-partitions of the held-out split into blocks of `B`, divided
///   by the inference block count `⌊n_inference / B⌋`.
///
/// The complete estimator is rejected: it is degenerate under the null.
pub fn raw_covariance(
    held_out: &[Coordinate],
    estimator: EstimatorSpec,
    n_inference: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let n_hold = common_len(held_out)?;
    match estimator {
        EstimatorSpec::Complete => Err(Error::InvalidConfig(
            "the complete estimator is degenerate under the null and cannot be used for selective inference"
                .into(),
        )),
        EstimatorSpec::Incomplete { ratio } => {
            let design = make_pair_design(n_hold, DesignSpec::Random { ratio }, seed)?;
            let cov = h_covariance(held_out, &design)?;
            Ok(cov / random_pair_count(n_inference, ratio) as f64)
        }
        EstimatorSpec::Linear => {
            let design = make_pair_design(
                n_hold,
                DesignSpec::Random {
                    ratio: LINEAR_COVARIANCE_RATIO,
                },
                seed,
            )?;
            let terms = n_inference / 2;
            if terms == 0 {
                return Err(Error::InsufficientSamples { needed: 2, found: n_inference });
            }
            Ok(h_covariance(held_out, &design)? / terms as f64)
        }
        EstimatorSpec::Block { .. } => {
            let b = estimator.block_size_for(n_inference).unwrap_or(2);
            let blocks_inf = n_inference / b;
            let blocks_hold = n_hold / b;
            if blocks_inf == 0 || blocks_hold == 0 {
                return Err(Error::InsufficientSamples {
                    needed: b,
                    found: n_inference.min(n_hold),
                });
            }
            let partitions = MIN_BLOCK_DRAWS
                .max(10 * held_out.len())
                .div_ceil(blocks_hold)
                .clamp(1, MAX_BLOCK_PARTITIONS);
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(partitions * blocks_hold);
            let mut idx: Vec<usize> = (0..n_hold).collect();
            for p in 0..partitions {
                idx.shuffle(&mut rng::seeded(rng::derive_seed(seed, p as u64)));
                let used = &idx[..blocks_hold * b];
                let per_coord: Vec<Vec<f64>> = held_out
                    .iter()
                    .map(|c| block_values(&c.x.select(used), &c.y.select(used), &c.kernel, b))
                    .collect();
                for blk in 0..blocks_hold {
                    rows.push(per_coord.iter().map(|v| v[blk]).collect());
                }
            }
            Ok(sample_covariance(&rows, held_out.len())? / blocks_inf as f64)
        }
    }
}

/// [`raw_covariance`] followed by [`ridge`].
pub fn estimate_covariance(
    held_out: &[Coordinate],
    estimator: EstimatorSpec,
    n_inference: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    Ok(ridge(raw_covariance(held_out, estimator, n_inference, seed)?))
}

/// Adds `ε I` with `ε = 1e-10 · trace / d`.
pub fn ridge(mut sigma: DMatrix<f64>) -> DMatrix<f64> {
    let d = sigma.nrows();
    let eps = 1e-10 * sigma.trace() / d as f64;
    for i in 0..d {
        sigma[(i, i)] += eps;
    }
    sigma
}

fn h_covariance(coords: &[Coordinate], design: &PairDesign) -> Result<DMatrix<f64>> {
    if design.len() < 2 {
        return Err(Error::InvalidDesign(format!(
            "covariance needs at least 2 design pairs, got {}",
            design.len()
        )));
    }
    let columns: Vec<Vec<f64>> = coords
        .iter()
        .map(|c| h_values(&c.x, &c.y, &c.kernel, design))
        .collect::<Result<_>>()?;
    Ok(column_covariance(&columns))
}

fn sample_covariance(rows: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    if rows.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, found: rows.len() });
    }
    let columns: Vec<Vec<f64>> = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    Ok(column_covariance(&columns))
}

/// Sample covariance (denominator `n - 1`) of equally long columns.
fn column_covariance(columns: &[Vec<f64>]) -> DMatrix<f64> {
    let d = columns.len();
    let n = columns[0].len();
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let m = stats::mean(c);
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let mut out = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let s = centered[a]
                .iter()
                .zip(&centered[b])
                .map(|(p, q)| p * q)
                .collect::<CompensatedSum>()
                .value()
                / (n - 1) as f64;
            out[(a, b)] = s;
            out[(b, a)] = s;
        }
    }
    out
}

/// Indices (ascending) of the `k` largest (`SelectMax`) or smallest
/// (`SelectMin`) entries of `z`. Ties go to the lower index.
pub fn select_top_k(z: &[f64], k: usize, direction: Direction) -> Result<Vec<usize>> {
    let d = z.len();
    if k == 0 || k >= d {
        return Err(Error::InvalidConfig(format!(
            "selection size k must satisfy 1 <= k < d = {d}, got {k}"
        )));
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidData(format!("score {i} is not finite")));
    }
    let mut order: Vec<usize> = (0..d).collect();
    match direction {
        Direction::SelectMax => order.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b))),
        Direction::SelectMin => order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b))),
    }
    let mut selected = order[..k].to_vec();
    selected.sort_unstable();
    Ok(selected)
}

/// One row `A_{s,ℓ}` of the selection event: `-sign` at `s`, `+sign` at `ℓ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub selected: usize,
    pub unselected: usize,
    pub sign: i8,
}

impl ConstraintRow {
    #[inline]
    pub fn apply(&self, v: &[f64]) -> f64 {
        f64::from(self.sign) * (v[self.unselected] - v[self.selected])
    }
}

/// Selection event `A z ≤ b` with `b = 0`, stored sparsely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConstraints {
    dim: usize,
    rows: Vec<ConstraintRow>,
}

impl SelectionConstraints {
    /// No constraints: the whole space.
    pub fn empty(dim: usize) -> Self {
        Self { dim, rows: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[ConstraintRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `A z`.
    pub fn evaluate(&self, z: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.apply(z)).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.rows.len(), self.dim);
        for (j, r) in self.rows.iter().enumerate() {
            a[(j, r.selected)] = -f64::from(r.sign);
            a[(j, r.unselected)] = f64::from(r.sign);
        }
        a
    }
}

/// Builds the `k·(d−k)` rows of the event "every selected score beats every
/// unselected one", ordered by selected index, then unselected index.
pub fn selection_constraints(
    selected: &[usize],
    dim: usize,
    direction: Direction,
) -> SelectionConstraints {
    let sign = match direction {
        Direction::SelectMax => 1,
        Direction::SelectMin => -1,
    };
    let mut in_set = vec![false; dim];
    for &s in selected {
        in_set[s] = true;
    }
    let mut sorted = selected.to_vec();
    sorted.sort_unstable();
    let rows = sorted
        .iter()
        .flat_map(|&s| {
            (0..dim).filter(|&l| !in_set[l]).map(move |l| ConstraintRow {
                selected: s,
                unselected: l,
                sign,
            })
        })
        .collect();
    SelectionConstraints { dim, rows }
}

/// Everything the selective test needs: scores, their covariance, and the
/// selection that was made from them.
#[derive(Debug, Clone)]
pub struct ScreenState {
    z: Vec<f64>,
    sigma: DMatrix<f64>,
    selected: Vec<usize>,
    direction: Direction,
    design_seed: u64,
}

impl ScreenState {
    /// Selects from `z` and validates the covariance.
    pub fn select(
        z: Vec<f64>,
        sigma: DMatrix<f64>,
        k: usize,
        direction: Direction,
        design_seed: u64,
    ) -> Result<Self> {
        let selected = select_top_k(&z, k, direction)?;
        Self::new(z, sigma, selected, direction, design_seed)
    }

    pub fn new(
        z: Vec<f64>,
        sigma: DMatrix<f64>,
        selected: Vec<usize>,
        direction: Direction,
        design_seed: u64,
    ) -> Result<Self> {
        let d = z.len();
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: sigma.nrows(),
            });
        }
        let scale = sigma.amax().max(f64::MIN_POSITIVE);
        for i in 0..d {
            for j in (i + 1)..d {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidData(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if selected.is_empty() || selected.len() >= d || selected.iter().any(|&s| s >= d) {
            return Err(Error::InvalidConfig(format!(
                "selected set of size {} invalid for d = {d}",
                selected.len()
            )));
        }
        let mut selected = selected;
        selected.sort_unstable();
        selected.dedup();
        Ok(Self {
            z,
            sigma,
            selected,
            direction,
            design_seed,
        })
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn design_seed(&self) -> u64 {
        self.design_seed
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn constraints(&self) -> SelectionConstraints {
        selection_constraints(&self.selected, self.z.len(), self.direction)
    }
}
