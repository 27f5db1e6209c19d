//! Gaussian kernel, bandwidth selection, and the four-term MMD kernel `h`.
//!
//! The Gaussian kernel is
//!
//! ```text
//! k(a, b) = exp(-‖a - b‖² / (2σ²))
//! ```
//!
//! and the U-statistic kernel on paired points `u = [x; y]`, `v = [x'; y']` is
//!
//! ```text
//! h(u, v) = k(x, x') + k(y, y') - k(x, y') - k(x', y)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::SampleSet;
use crate::stats;

/// Lower bound applied to data-driven bandwidths so constant features still
/// yield a usable kernel.
pub const BANDWIDTH_FLOOR: f64 = 1e-8;

/// Default number of sampled pairs for the median heuristic.
pub const DEFAULT_MEDIAN_PAIRS: usize = 10_000;

/// How the Gaussian width is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Fixed(f64),
    MedianHeuristic { max_pairs: usize },
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule::MedianHeuristic {
            max_pairs: DEFAULT_MEDIAN_PAIRS,
        }
    }
}

/// A resolved Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    bandwidth: f64,
    neg_inv_two_sigma2: f64,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kernel bandwidth must be finite and positive, got {bandwidth}"
            )));
        }
        Ok(Self {
            bandwidth,
            neg_inv_two_sigma2: -1.0 / (2.0 * bandwidth * bandwidth),
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Kernel value without the dimension check. Callers guarantee
    /// `a.len() == b.len()`.
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
        (d2 * self.neg_inv_two_sigma2).exp()
    }
}

/// Resolves a bandwidth rule against the pooled sample.
///
/// The median heuristic uses every pair when there are at most `max_pairs`
/// of them, and otherwise `max_pairs` pairs `(i, j)`, `i != j`, drawn
/// uniformly with replacement.
pub fn resolve_bandwidth<R: Rng + ?Sized>(
    pooled: &SampleSet,
    rule: BandwidthRule,
    rng: &mut R,
) -> Result<f64> {
    match rule {
        BandwidthRule::Fixed(v) => {
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(Error::InvalidConfig(format!(
                    "fixed bandwidth must be finite and positive, got {v}"
                )))
            }
        }
        BandwidthRule::MedianHeuristic { max_pairs } => {
            let n = pooled.len();
            if n < 2 {
                return Err(Error::InsufficientSamples { needed: 2, found: n });
            }
            if max_pairs == 0 {
                return Err(Error::InvalidConfig("median heuristic needs max_pairs > 0".into()));
            }
            let total = n * (n - 1) / 2;
            let mut dists = Vec::with_capacity(total.min(max_pairs));
            if total <= max_pairs {
                for i in 0..n {
                    for j in (i + 1)..n {
                        dists.push(euclidean(pooled.sample(i), pooled.sample(j)));
                    }
                }
            } else {
                for _ in 0..max_pairs {
                    let i = rng.random_range(0..n);
                    let mut j = rng.random_range(0..n - 1);
                    if j >= i {
                        j += 1;
                    }
                    dists.push(euclidean(pooled.sample(i), pooled.sample(j)));
                }
            }
            Ok(stats::median_in_place(&mut dists).max(BANDWIDTH_FLOOR))
        }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// `exp(-‖a - b‖² / (2σ²))`.
pub fn gaussian_kernel(a: &[f64], b: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(cfg.eval(a, b))
}

/// A point `u = [x; y]` of the paired construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedPoint<'a> {
    x: &'a [f64],
    y: &'a [f64],
}

impl<'a> PairedPoint<'a> {
    pub fn new(x: &'a [f64], y: &'a [f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &'a [f64] {
        self.x
    }

    pub fn y(&self) -> &'a [f64] {
        self.y
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

pub fn h_kernel(u: &PairedPoint<'_>, v: &PairedPoint<'_>, cfg: &KernelConfig) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    Ok(h_unchecked(u.x, u.y, v.x, v.y, cfg))
}

#[inline]
pub(crate) fn h_unchecked(ux: &[f64], uy: &[f64], vx: &[f64], vy: &[f64], cfg: &KernelConfig) -> f64 {
    // (kxx + kyy) - (kxy + kyx) keeps the two symmetric halves together so
    // h(u, v) == h(v, u) bit-for-bit.
    (cfg.eval(ux, vx) + cfg.eval(uy, vy)) - (cfg.eval(ux, vy) + cfg.eval(vx, uy))
}
