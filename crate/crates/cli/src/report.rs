//! `report.json` and `results.csv`.
//!
//! Everything except the `provenance` block is a pure function of inputs,
//! config and seed, so two runs can be compared byte for byte after dropping
//! that block.

use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, Result};
use crate::experiments::ResultRow;

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const RESULTS_FILE: &str = "results.csv";

/// One tested or untested coordinate (feature or candidate).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub index: usize,
    pub name: String,
    pub score: f64,
    pub selected: bool,
    pub p_value: Option<f64>,
    pub naive_p_value: Option<f64>,
    pub significant: Option<bool>,
    /// `None` for an unbounded end.
    pub v_minus: Option<f64>,
    pub v_plus: Option<f64>,
    pub degenerate: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub inputs: Vec<PathBuf>,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
}

impl Provenance {
    pub fn new(inputs: Vec<PathBuf>, started: SystemTime, elapsed: Duration) -> Self {
        Self {
            tool: format!("mmdsel {}", env!("CARGO_PKG_VERSION")),
            inputs,
            started_unix_seconds: started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_clock_seconds: elapsed.as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: Value,
    pub records: Vec<Record>,
    pub summary: Value,
    pub provenance: Provenance,
}

pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_report(dir: &Path, report: &Report) -> Result<PathBuf> {
    create_dir(dir)?;
    let path = dir.join(REPORT_FILE);
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// Long format: `experiment,estimator,n,trial,metric,value`. Values use the
/// shortest representation that round-trips.
pub fn write_results(dir: &Path, rows: &[ResultRow]) -> Result<PathBuf> {
    create_dir(dir)?;
    let path = dir.join(RESULTS_FILE);
    let err = |e: csv::Error| CliError::data(&path, e.to_string());
    let mut w = csv::Writer::from_path(&path).map_err(err)?;
    w.write_record(["experiment", "estimator", "n", "trial", "metric", "value"]).map_err(err)?;
    for r in rows {
        let trial = r.trial.map(|t| t.to_string()).unwrap_or_default();
        w.write_record([
            r.experiment.as_str(),
            r.estimator.as_str(),
            &r.n.to_string(),
            &trial,
            r.metric.as_str(),
            &format!("{:?}", r.value),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
