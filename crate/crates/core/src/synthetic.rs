//! Seeded Gaussian generators for simulation runs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::sample::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Adds `shift` to the mean of the first `n_true` coordinates of Y.
    MeanShift(f64),
    /// Multiplies the variance of the first `n_true` coordinates of Y.
    VarianceShift(f64),
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub d: usize,
    pub n_true: usize,
    /// Samples per side.
    pub n: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn mean_shift(n: usize, seed: u64) -> Self {
        Self { kind: SyntheticKind::MeanShift(1.0), d: 50, n_true: 10, n, seed }
    }

    pub fn variance_shift(n: usize, seed: u64) -> Self {
        Self { kind: SyntheticKind::VarianceShift(1.5), d: 50, n_true: 10, n, seed }
    }

    pub fn null(d: usize, n: usize, seed: u64) -> Self {
        Self { kind: SyntheticKind::Null, d, n_true: 0, n, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidConfig("synthetic dimension must be positive".into()));
        }
        if self.n_true > self.d {
            return Err(Error::InvalidConfig(format!(
                "n_true = {} exceeds dimension {}",
                self.n_true, self.d
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("synthetic sample size must be positive".into()));
        }
        match self.kind {
            SyntheticKind::MeanShift(s) if !s.is_finite() => {
                Err(Error::InvalidConfig(format!("mean shift must be finite, got {s}")))
            }
            SyntheticKind::VarianceShift(f) if !(f > 0.0 && f.is_finite()) => {
                Err(Error::InvalidConfig(format!("variance factor must be positive, got {f}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub x: SampleSet,
    pub y: SampleSet,
    /// `0..n_true`.
    pub true_features: Vec<usize>,
}

fn standard_normals(n: usize, seed: u64) -> Vec<f64> {
    seeded(seed).sample_iter(StandardNormal).take(n).collect()
}

/// Draws X ~ N(0, I_d) and Y from the alternative described by `spec.kind`.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let SyntheticSpec { kind, d, n_true, n, seed } = *spec;
    let x = standard_normals(n * d, derive_seed(seed, 0));
    let mut y = standard_normals(n * d, derive_seed(seed, 1));
    for row in y.chunks_exact_mut(d) {
        for v in &mut row[..n_true] {
            match kind {
                SyntheticKind::MeanShift(s) => *v += s,
                SyntheticKind::VarianceShift(f) => *v *= f.sqrt(),
                SyntheticKind::Null => {}
            }
        }
    }
    Ok(SyntheticData {
        x: SampleSet::from_sample_major(d, x)?,
        y: SampleSet::from_sample_major(d, y)?,
        true_features: (0..n_true).collect(),
    })
}

/// Appends `count` i.i.d. N(0, 1) columns to both sides.
pub fn append_random_features(
    x: &SampleSet,
    y: &SampleSet,
    count: usize,
    seed: u64,
) -> Result<(SampleSet, SampleSet)> {
    let ex = standard_normals(x.len() * count, derive_seed(seed, 0));
    let ey = standard_normals(y.len() * count, derive_seed(seed, 1));
    Ok((x.with_extra_features(count, &ex)?, y.with_extra_features(count, &ey)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, sample_variance};

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec::mean_shift(40, 3);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.x.as_sample_major(), b.x.as_sample_major());
        assert_eq!(a.y.as_sample_major(), b.y.as_sample_major());
        assert_eq!(a.true_features, (0..10).collect::<Vec<_>>());
        let c = generate(&SyntheticSpec { seed: 4, ..spec }).unwrap();
        assert_ne!(a.x.as_sample_major(), c.x.as_sample_major());
    }

    #[test]
    fn rejects_bad_specs() {
        let ok = SyntheticSpec::mean_shift(10, 0);
        assert!(generate(&SyntheticSpec { n_true: 51, ..ok }).is_err());
        assert!(generate(&SyntheticSpec { kind: SyntheticKind::VarianceShift(0.0), ..ok }).is_err());
        assert!(generate(&SyntheticSpec { kind: SyntheticKind::MeanShift(f64::NAN), ..ok }).is_err());
        assert!(generate(&SyntheticSpec { d: 0, n_true: 0, ..ok }).is_err());
    }

    #[test]
    fn mean_shift_moves_first_coordinate() {
        let n = 2000;
        let data = generate(&SyntheticSpec::mean_shift(n, 11)).unwrap();
        let diff = mean(&data.y.feature_values(0)) - mean(&data.x.feature_values(0));
        assert!((diff - 1.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
        let null = mean(&data.y.feature_values(20)) - mean(&data.x.feature_values(20));
        assert!(null.abs() < 3.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn variance_shift_scales_first_coordinate() {
        let mut ratios = Vec::new();
        for seed in 0..50 {
            let data = generate(&SyntheticSpec::variance_shift(400, seed)).unwrap();
            let vy = sample_variance(&data.y.feature_values(0)).unwrap();
            let vx = sample_variance(&data.x.feature_values(0)).unwrap();
            ratios.push(vy / vx);
        }
        assert!((mean(&ratios) - 1.5).abs() < 0.05);
    }

    #[test]
    fn null_t_statistics_are_standard() {
        let mut t = Vec::new();
        for seed in 0..400 {
            let data = generate(&SyntheticSpec::null(1, 50, seed)).unwrap();
            let (a, b) = (data.x.feature_values(0), data.y.feature_values(0));
            let se = ((sample_variance(&a).unwrap() + sample_variance(&b).unwrap()) / 50.0).sqrt();
            t.push((mean(&b) - mean(&a)) / se);
        }
        assert!(mean(&t).abs() < 0.15);
        assert!((sample_variance(&t).unwrap() - 1.0).abs() < 0.2);
    }

    #[test]
    fn random_features_are_appended() {
        let data = generate(&SyntheticSpec::mean_shift(5, 1)).unwrap();
        let (x, y) = append_random_features(&data.x, &data.y, 3, 2).unwrap();
        assert_eq!((x.dim(), y.dim()), (53, 53));
        assert_eq!(&x.sample(2)[..50], data.x.sample(2));
    }
}
