//! Run settings: command-line flags, the optional `key=value` file, and the
//! validated [`RunConfig`] built from them.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, ValueEnum};
use mmdsel_core::{Alternative, BandwidthRule, EstimatorSpec};
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    Complete,
    Block,
    Linear,
    Incomplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlternativeArg {
    TwoSided,
    Greater,
}

impl From<AlternativeArg> for Alternative {
    fn from(a: AlternativeArg) -> Self {
        match a {
            AlternativeArg::TwoSided => Alternative::TwoSided,
            AlternativeArg::Greater => Alternative::Greater,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One file per sample set; each row is a sample.
    Rows,
    /// One file holding both sets, told apart by a 0/1 label column.
    Labeled,
}

/// `median` or a fixed positive width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthArg {
    Median,
    Fixed(f64),
}

impl std::str::FromStr for BandwidthArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("median") {
            return Ok(BandwidthArg::Median);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(BandwidthArg::Fixed(v)),
            _ => Err(format!("expected `median` or a positive number, got `{s}`")),
        }
    }
}

/// Flags shared by every subcommand. All are optional so that values from a
/// config file can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct Settings {
    /// MMD estimator used for the scores.
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorName>,
    /// Pair ratio of the incomplete estimator (ℓ = r·n).
    #[arg(long)]
    pub r: Option<f64>,
    /// Block size of the block estimator (default round(√n)).
    #[arg(long)]
    pub block_size: Option<usize>,
    /// Number of features (or candidates) selected before testing.
    #[arg(long)]
    pub k: Option<usize>,
    /// Significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fraction of samples held out for the covariance estimate.
    #[arg(long)]
    pub cov_fraction: Option<f64>,
    /// Base seed; every random draw derives from it
    #[arg(long)]
    pub seed: Option<u64>,
    /// Kernel width: `median` or a positive number.
    #[arg(long)]
    pub bandwidth: Option<BandwidthArg>,
    /// Side of the test (default two-sided; `simulate fpr-tpr` defaults to greater)
    #[arg(long, value_enum)]
    pub alternative: Option<AlternativeArg>,
    /// Skip the selection adjustment (plain normal p-values).
    #[arg(long)]
    pub naive: bool,
    /// Where report.json and results.csv go (default `mmdsel-out`)
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Monte-Carlo replications for `simulate`.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_enum)]
    pub layout: Option<Layout>,
    /// Label column for `--layout labeled`.
    #[arg(long)]
    pub label_column: Option<String>,
    /// `key=value` file with defaults for any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Parser)]
#[command(no_binary_name = true, disable_help_flag = true)]
struct FileSettings {
    #[command(flatten)]
    settings: Settings,
}

impl Settings {
    /// Reads a `key=value` file. Keys are flag names without the leading
    /// dashes (`block-size` and `block_size` both work); `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Settings::parse_file(&text).map_err(|m| CliError::Config(format!("{}: {m}", path.display())))
    }

    fn parse_file(text: &str) -> Result<Settings, String> {
        let mut argv = Vec::new();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", lineno + 1))?;
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            if key == "config" {
                return Err(format!("line {}: config files cannot include other config files", lineno + 1));
            }
            if !seen.insert(key.clone()) {
                return Err(format!("line {}: duplicate key `{key}`", lineno + 1));
            }
            if key == "naive" {
                match value.to_ascii_lowercase().as_str() {
                    "true" | "1" | "yes" => argv.push("--naive".to_string()),
                    "false" | "0" | "no" => {}
                    _ => return Err(format!("line {}: naive must be true or false", lineno + 1)),
                }
            } else {
                argv.push(format!("--{key}={value}"));
            }
        }
        FileSettings::try_parse_from(argv)
            .map(|f| f.settings)
            .map_err(|e| e.render().to_string().trim().to_string())
    }

    /// Loads `--config` if given and fills every unset flag from it.
    pub fn resolve(self) -> Result<Settings> {
        match self.config.clone() {
            Some(path) => {
                let file = Settings::from_file(&path)?;
                Ok(self.overlay(file))
            }
            None => Ok(self),
        }
    }

    /// `self` wins wherever it is set.
    pub fn overlay(self, file: Settings) -> Settings {
        Settings {
            estimator: self.estimator.or(file.estimator),
            r: self.r.or(file.r),
            block_size: self.block_size.or(file.block_size),
            k: self.k.or(file.k),
            alpha: self.alpha.or(file.alpha),
            cov_fraction: self.cov_fraction.or(file.cov_fraction),
            seed: self.seed.or(file.seed),
            bandwidth: self.bandwidth.or(file.bandwidth),
            alternative: self.alternative.or(file.alternative),
            naive: self.naive || file.naive,
            output_dir: self.output_dir.or(file.output_dir),
            trials: self.trials.or(file.trials),
            layout: self.layout.or(file.layout),
            label_column: self.label_column.or(file.label_column),
            config: self.config,
        }
    }
}

pub const DEFAULT_K: usize = 30;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_COV_FRACTION: f64 = 1.0 / 3.0;
pub const DEFAULT_RATIO: f64 = 10.0;
pub const DEFAULT_SEED: u64 = 0;

/// Validated settings of one screening-and-testing run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunConfig {
    pub estimator: EstimatorSpec,
    pub k: usize,
    pub alpha: f64,
    pub cov_fraction: f64,
    pub seed: u64,
    pub bandwidth: BandwidthRule,
    pub alternative: Alternative,
    pub naive: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorSpec::Incomplete { ratio: DEFAULT_RATIO },
            k: DEFAULT_K,
            alpha: DEFAULT_ALPHA,
            cov_fraction: DEFAULT_COV_FRACTION,
            seed: DEFAULT_SEED,
            bandwidth: BandwidthRule::default(),
            alternative: Alternative::TwoSided,
            naive: false,
        }
    }
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<RunConfig> {
        let d = RunConfig::default();
        let estimator = match s.estimator.unwrap_or(EstimatorName::Incomplete) {
            EstimatorName::Complete => EstimatorSpec::Complete,
            EstimatorName::Block => EstimatorSpec::Block { block_size: s.block_size },
            EstimatorName::Linear => EstimatorSpec::Linear,
            EstimatorName::Incomplete => EstimatorSpec::Incomplete { ratio: s.r.unwrap_or(DEFAULT_RATIO) },
        };
        let cfg = RunConfig {
            estimator,
            k: s.k.unwrap_or(d.k),
            alpha: s.alpha.unwrap_or(d.alpha),
            cov_fraction: s.cov_fraction.unwrap_or(d.cov_fraction),
            seed: s.seed.unwrap_or(d.seed),
            bandwidth: match s.bandwidth {
                None | Some(BandwidthArg::Median) => BandwidthRule::default(),
                Some(BandwidthArg::Fixed(w)) => BandwidthRule::Fixed(w),
            },
            alternative: s.alternative.map(Into::into).unwrap_or(d.alternative),
            naive: s.naive,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if let EstimatorSpec::Incomplete { ratio } = self.estimator {
            if !(ratio.is_finite() && ratio > 0.0) {
                return bad(format!("--r must be positive, got {ratio}"));
            }
        }
        if let EstimatorSpec::Block { block_size: Some(b) } = self.estimator {
            if b < 2 {
                return bad(format!("--block-size must be at least 2, got {b}"));
            }
        }
        if self.k == 0 {
            return bad("--k must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("--alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.cov_fraction > 0.0 && self.cov_fraction < 1.0) {
            return bad(format!("--cov-fraction must lie in (0, 1), got {}", self.cov_fraction));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_fill_unset_flags() {
        let file = Settings::parse_file("# defaults\nestimator = block\nblock_size=12\nk=5\nalpha=0.1\nnaive=true\n").unwrap();
        let flags = Settings { k: Some(7), ..Default::default() };
        let merged = flags.overlay(file);
        assert_eq!(merged.k, Some(7));
        assert_eq!(merged.block_size, Some(12));
        assert!(merged.naive);
        let cfg = RunConfig::from_settings(&merged).unwrap();
        assert_eq!(cfg.estimator, EstimatorSpec::Block { block_size: Some(12) });
        assert_eq!(cfg.alpha, 0.1);
    }

    #[test]
    fn file_errors() {
        assert!(Settings::parse_file("no equals sign").is_err());
        assert!(Settings::parse_file("unknown=1").is_err());
        assert!(Settings::parse_file("k=1\nk=2").is_err());
        assert!(Settings::parse_file("k=abc").is_err());
        assert!(Settings::parse_file("naive=maybe").is_err());
        assert!(Settings::parse_file("bandwidth=-1").is_err());
    }

    #[test]
    fn defaults_and_validation() {
        let cfg = RunConfig::from_settings(&Settings::default()).unwrap();
        assert_eq!(cfg, RunConfig::default());
        let bad = |s: Settings| RunConfig::from_settings(&s).is_err();
        assert!(bad(Settings { alpha: Some(1.0), ..Default::default() }));
        assert!(bad(Settings { cov_fraction: Some(0.0), ..Default::default() }));
        assert!(bad(Settings { k: Some(0), ..Default::default() }));
        assert!(bad(Settings { r: Some(0.0), ..Default::default() }));
        assert!(bad(Settings { estimator: Some(EstimatorName::Block), block_size: Some(1), ..Default::default() }));
    }
}
