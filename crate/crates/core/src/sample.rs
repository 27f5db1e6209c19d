//! Sample containers.
//!
//! A [`SampleSet`] is a `d × n` real matrix: `n` samples (columns), each a
//! vector of `d` features (rows). Samples are stored contiguously so kernel
//! evaluations read one slice per point.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    len: usize,
    values: Vec<f64>,
    feature_names: Vec<String>,
}

impl SampleSet {
    /// Builds a set from sample-major values (`values[i * dim + f]` is
    /// feature `f` of sample `i`).
    pub fn from_sample_major(dim: usize, values: Vec<f64>) -> Result<Self> {
        let names = (0..dim).map(|f| format!("f{f}")).collect();
        Self::with_names(dim, values, names)
    }

    pub fn with_names(dim: usize, values: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidData("sample dimension must be positive".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidData(format!(
                "{} values do not split into samples of dimension {dim}",
                values.len()
            )));
        }
        if feature_names.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: feature_names.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value in sample {} feature {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self {
            dim,
            len: values.len() / dim,
            values,
            feature_names,
        })
    }

    /// Builds a set from a list of sample vectors.
    pub fn from_samples<S: AsRef<[f64]>>(samples: &[S]) -> Result<Self> {
        let dim = samples
            .first()
            .map(|s| s.as_ref().len())
            .ok_or(Error::InsufficientSamples { needed: 1, found: 0 })?;
        let mut values = Vec::with_capacity(dim * samples.len());
        for s in samples {
            let s = s.as_ref();
            if s.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.len(),
                });
            }
            values.extend_from_slice(s);
        }
        Self::from_sample_major(dim, values)
    }

    /// One-dimensional set holding `values` as its samples.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::from_sample_major(1, values.to_vec())
    }

    /// Feature count `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sample count `n`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Feature vector of sample `i`.
    #[inline]
    pub fn sample(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_sample_major(&self) -> &[f64] {
        &self.values
    }

    /// Values of feature `f` across all samples.
    pub fn feature_values(&self, f: usize) -> Vec<f64> {
        self.samples().map(|s| s[f]).collect()
    }

    /// One-dimensional slice holding feature `f`.
    pub fn feature(&self, f: usize) -> SampleSet {
        SampleSet {
            dim: 1,
            len: self.len,
            values: self.feature_values(f),
            feature_names: vec![self.feature_names[f].clone()],
        }
    }

    /// Samples at `indices`, in that order (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> SampleSet {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.sample(i));
        }
        SampleSet {
            dim: self.dim,
            len: indices.len(),
            values,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Contiguous sample range `start..end`.
    pub fn range(&self, start: usize, end: usize) -> SampleSet {
        SampleSet {
            dim: self.dim,
            len: end - start,
            values: self.values[start * self.dim..end * self.dim].to_vec(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// First `n` samples.
    pub fn truncated(&self, n: usize) -> SampleSet {
        self.range(0, n.min(self.len))
    }

    /// Concatenates the samples of `self` and `other` (pooled set).
    pub fn pooled(&self, other: &SampleSet) -> Result<SampleSet> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(SampleSet {
            dim: self.dim,
            len: self.len + other.len,
            values,
            feature_names: self.feature_names.clone(),
        })
    }

    /// Appends extra features (given sample-major, `extra_dim` per sample).
    pub fn with_extra_features(&self, extra_dim: usize, extra: &[f64]) -> Result<SampleSet> {
        if extra.len() != extra_dim * self.len {
            return Err(Error::DimensionMismatch {
                expected: extra_dim * self.len,
                found: extra.len(),
            });
        }
        let dim = self.dim + extra_dim;
        let mut values = Vec::with_capacity(dim * self.len);
        for (i, s) in self.samples().enumerate() {
            values.extend_from_slice(s);
            values.extend_from_slice(&extra[i * extra_dim..(i + 1) * extra_dim]);
        }
        let mut names = self.feature_names.clone();
        names.extend((self.dim..dim).map(|f| format!("f{f}")));
        Ok(SampleSet {
            dim,
            len: self.len,
            values,
            feature_names: names,
        })
    }

    /// Returns a copy with samples permuted by a seeded shuffle.
    pub fn shuffled(&self, seed: u64) -> SampleSet {
        let mut idx: Vec<usize> = (0..self.len).collect();
        idx.shuffle(&mut rng::seeded(seed));
        self.select(&idx)
    }
}

/// Splits a sample set after a seeded shuffle: the first `ceil(fraction * n)`
/// samples go to the held-out part, the rest to the main part.
pub fn split_holdout(set: &SampleSet, fraction: f64, seed: u64) -> Result<(SampleSet, SampleSet)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let shuffled = set.shuffled(seed);
    let n_hold = (fraction * set.len() as f64).ceil() as usize;
    let n_hold = n_hold.min(set.len());
    Ok((shuffled.range(0, n_hold), shuffled.range(n_hold, set.len())))
}
