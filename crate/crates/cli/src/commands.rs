//! Subcommand definitions and their drivers.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime};

use clap::{Parser, Subcommand, ValueEnum};
use mmdsel_core::synthetic::{generate, SyntheticKind, SyntheticSpec};
use mmdsel_core::{Alternative, EstimatorSpec, PsiResult, SampleSet};
use serde_json::json;

use crate::config::{Layout, RunConfig, Settings};
use crate::data::{load_rows, load_samples, write_samples, Loaded};
use crate::error::{CliError, Result};
use crate::experiments::{self, estimator_label, OracleSetup, ResultRow};
use crate::pipeline::{feature_psi, positive_rates, sample_select, ScreenOutcome};
use crate::report::{finite, write_report, write_results, Provenance, Record, Report};
use crate::timing;

pub const DEFAULT_OUTPUT_DIR: &str = "mmdsel-out";

#[derive(Debug, Parser)]
#[command(name = "mmdsel", version, about = "MMD feature screening and sample selection with selective p-values")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Normality,
    FprTpr,
    Type2,
    PvalueUniformity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShiftKind {
    MeanShift,
    VarianceShift,
    Null,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Screen features of X against Y and test the selected ones.
    FeaturePsi {
        /// X samples (or the single labeled file with `--layout labeled`).
        x_file: PathBuf,
        /// Y samples; omitted with `--layout labeled`.
        y_file: Option<PathBuf>,
        /// Comma-separated indices of known true features, for TPR/FPR.
        #[arg(long, value_delimiter = ',')]
        true_features: Vec<usize>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Pick the candidate sample set closest to a reference and test it.
    SampleSelect {
        #[arg(long)]
        reference: PathBuf,
        /// Two or more candidate files.
        #[arg(required = true)]
        candidates: Vec<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Monte-Carlo experiments; writes long-format CSV.
    Simulate {
        #[arg(value_enum)]
        experiment: Experiment,
        /// Sample sizes (comma-separated).
        #[arg(long, value_delimiter = ',')]
        n_grid: Vec<usize>,
        /// Synthetic model for `fpr-tpr`.
        #[arg(long, value_enum, default_value = "mean-shift")]
        kind: ShiftKind,
        /// Mean shift (`type2`, `fpr-tpr` mean-shift) or variance factor.
        #[arg(long)]
        shift: Option<f64>,
        /// Pair ratios for `normality` (comma-separated).
        #[arg(long, value_delimiter = ',')]
        ratios: Vec<f64>,
        /// Keep per-trial rows, not just aggregates.
        #[arg(long)]
        per_trial: bool,
        #[command(flatten)]
        settings: Settings,
    },
    /// Median wall-clock per estimator and sample size.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "2000,5000,10000,20000")]
        n_grid: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[command(flatten)]
        settings: Settings,
    },
    /// Write synthetic X and Y as CSV files.
    Generate {
        #[arg(long, value_enum, default_value = "mean-shift")]
        kind: ShiftKind,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        d: usize,
        #[arg(long, default_value_t = 10)]
        n_true: usize,
        /// Mean shift or variance factor (defaults 1 and 1.5).
        #[arg(long)]
        shift: Option<f64>,
        #[command(flatten)]
        settings: Settings,
    },
}

fn output_dir(s: &Settings) -> PathBuf {
    s.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn finish(
    command: &str,
    dir: &Path,
    config: serde_json::Value,
    records: Vec<Record>,
    summary: serde_json::Value,
    rows: &[ResultRow],
    inputs: Vec<PathBuf>,
    started: (SystemTime, Instant),
) -> Result<()> {
    let report = Report {
        schema_version: crate::report::SCHEMA_VERSION,
        command: command.into(),
        config,
        records,
        summary,
        provenance: Provenance::new(inputs, started.0, started.1.elapsed()),
    };
    let r = write_report(dir, &report)?;
    let c = write_results(dir, rows)?;
    log::info!("wrote {} and {}", r.display(), c.display());
    Ok(())
}

fn records(outcome: &ScreenOutcome, names: &[String]) -> Vec<Record> {
    let st = &outcome.state;
    let tested = |f: usize| -> Option<(&PsiResult, &PsiResult)> {
        st.selected().iter().position(|&s| s == f).map(|i| (&outcome.selective[i], &outcome.naive[i]))
    };
    (0..st.dim())
        .map(|f| {
            let t = tested(f);
            Record {
                index: f,
                name: names.get(f).cloned().unwrap_or_else(|| f.to_string()),
                score: st.z()[f],
                selected: t.is_some(),
                p_value: t.map(|(s, _)| s.p_value),
                naive_p_value: t.map(|(_, n)| n.p_value),
                significant: None,
                v_minus: t.and_then(|(s, _)| finite(s.v_minus)),
                v_plus: t.and_then(|(s, _)| finite(s.v_plus)),
                degenerate: t.map(|(s, _)| s.degenerate),
            }
        })
        .collect()
}

fn mark_significant(records: &mut [Record], outcome: &ScreenOutcome, naive: bool) {
    for (&s, r) in outcome.state.selected().iter().zip(outcome.reported(naive)) {
        records[s].significant = r.significant;
    }
}

fn run_config(settings: &Settings) -> Result<RunConfig> {
    RunConfig::from_settings(settings)
}

fn cmd_feature_psi(x_file: &Path, y_file: Option<&Path>, truth: &[usize], settings: Settings) -> Result<()> {
    let started = (SystemTime::now(), Instant::now());
    let cfg = run_config(&settings)?;
    let layout = settings.layout.unwrap_or(Layout::Rows);
    let (x, y, inputs) = match (layout, y_file) {
        (Layout::Rows, Some(yf)) => (load_rows(x_file)?, load_rows(yf)?, vec![x_file.into(), yf.into()]),
        (Layout::Rows, None) => return Err(CliError::Config("--layout rows needs both X and Y files".into())),
        (Layout::Labeled, None) => match load_samples(x_file, Layout::Labeled, settings.label_column.as_deref())? {
            Loaded::Pair { x, y } => (x, y, vec![x_file.into()]),
            Loaded::Single(_) => unreachable!("labeled layout yields two sets"),
        },
        (Layout::Labeled, Some(_)) => return Err(CliError::Config("--layout labeled takes a single file".into())),
    };
    if x.feature_names() != y.feature_names() {
        log::warn!("X and Y headers differ; using the X names");
    }
    if let Some(&bad) = truth.iter().find(|&&f| f >= x.dim()) {
        return Err(CliError::Config(format!("--true-features index {bad} out of range for {} features", x.dim())));
    }
    let out = feature_psi(&x, &y, &cfg)?;
    let mut recs = records(&out, x.feature_names());
    mark_significant(&mut recs, &out, cfg.naive);

    let flagged = out.flagged(cfg.naive);
    let (tpr, fpr) = if truth.is_empty() {
        (None, None)
    } else {
        positive_rates(&flagged, out.state.selected(), truth)
    };
    let label = estimator_label(&cfg.estimator);
    let n = out.n_inference;
    let mut rows = Vec::new();
    for r in &recs {
        rows.push(ResultRow::new("feature_psi", &label, n, None, &format!("score[{}]", r.index), r.score));
        if let Some(p) = r.p_value {
            rows.push(ResultRow::new("feature_psi", &label, n, None, &format!("p_value[{}]", r.index), p));
        }
    }
    rows.push(ResultRow::new("feature_psi", &label, n, None, "n_significant", flagged.len() as f64));
    if let (Some(t), Some(f)) = (tpr, fpr) {
        rows.push(ResultRow::new("feature_psi", &label, n, None, "tpr", t));
        rows.push(ResultRow::new("feature_psi", &label, n, None, "fpr", f));
    }
    let summary = json!({
        "n_features": x.dim(),
        "n_inference": out.n_inference,
        "n_held_out": out.n_held_out,
        "mode": if cfg.naive { "naive" } else { "selective" },
        "selected": out.state.selected(),
        "significant": flagged,
        "true_features": truth,
        "tpr": tpr,
        "fpr": fpr,
        "bandwidths": out.bandwidths,
    });
    finish("feature-psi", &output_dir(&settings), json!(cfg), recs, summary, &rows, inputs, started)
}

fn cmd_sample_select(reference: &Path, candidates: &[PathBuf], settings: Settings) -> Result<()> {
    let started = (SystemTime::now(), Instant::now());
    let cfg = run_config(&settings)?;
    let reference_set = load_rows(reference)?;
    let sets: Vec<SampleSet> = candidates.iter().map(|p| load_rows(p)).collect::<Result<_>>()?;
    let out = sample_select(&sets, &reference_set, &cfg)?;
    let names: Vec<String> = candidates.iter().map(|p| p.display().to_string()).collect();
    let mut recs = records(&out.screen, &names);
    mark_significant(&mut recs, &out.screen, cfg.naive);

    let label = estimator_label(&cfg.estimator);
    let n = out.screen.n_inference;
    let mut rows: Vec<ResultRow> = out
        .ranking
        .iter()
        .map(|&c| ResultRow::new("sample_select", &label, n, None, &format!("score[{c}]"), out.screen.state.z()[c]))
        .collect();
    let winner = out.winner();
    let tested = &out.screen.reported(cfg.naive)[0];
    rows.push(ResultRow::new("sample_select", &label, n, None, "winner", winner as f64));
    rows.push(ResultRow::new("sample_select", &label, n, None, "p_value", tested.p_value));
    let summary = json!({
        "ranking": out.ranking,
        "winner": winner,
        "winner_file": names[winner],
        "p_value": tested.p_value,
        "significant": tested.significant,
        "near_tie": out.near_tie,
        "degenerate": tested.degenerate,
        "n_inference": out.screen.n_inference,
        "n_held_out": out.screen.n_held_out,
        "bandwidth": out.screen.bandwidths[0],
    });
    let mut inputs = vec![reference.to_path_buf()];
    inputs.extend(candidates.iter().cloned());
    finish("sample-select", &output_dir(&settings), json!(cfg), recs, summary, &rows, inputs, started)
}

/// Estimator arms compared by the Monte-Carlo suites.
fn psi_arms() -> Vec<EstimatorSpec> {
    vec![
        EstimatorSpec::Incomplete { ratio: 10.0 },
        EstimatorSpec::Block { block_size: None },
        EstimatorSpec::Linear,
    ]
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    experiment: Experiment,
    n_grid: &[usize],
    kind: ShiftKind,
    shift: Option<f64>,
    ratios: &[f64],
    per_trial: bool,
    settings: Settings,
) -> Result<()> {
    let started = (SystemTime::now(), Instant::now());
    let seed = settings.seed.unwrap_or(0);
    let trials = settings.trials.unwrap_or(match experiment {
        Experiment::Normality => 2000,
        Experiment::FprTpr => 200,
        Experiment::Type2 => 500,
        Experiment::PvalueUniformity => 1000,
    });
    if trials < 2 {
        return Err(CliError::Config("--trials must be at least 2".into()));
    }
    if n_grid.iter().any(|&n| n < 4) {
        return Err(CliError::Config("every --n-grid entry must be at least 4".into()));
    }
    let (rows, config) = match experiment {
        Experiment::Normality => {
            let n_grid = if n_grid.is_empty() { &[200][..] } else { n_grid };
            let ratios = if ratios.is_empty() { &[1.0, 10.0, 100.0][..] } else { ratios };
            let shift = shift.unwrap_or(0.0);
            let mut ests: Vec<EstimatorSpec> = vec![EstimatorSpec::Complete];
            ests.extend([5, 20, 100].map(|b| EstimatorSpec::Block { block_size: Some(b) }));
            ests.extend(ratios.iter().map(|&r| EstimatorSpec::Incomplete { ratio: r }));
            let mut rows = Vec::new();
            for &n in n_grid {
                let usable: Vec<EstimatorSpec> = ests
                    .iter()
                    .copied()
                    .filter(|e| e.block_size_for(n).is_none_or(|b| b <= n))
                    .collect();
                rows.extend(experiments::normality(&usable, n, shift, trials, seed, per_trial)?);
            }
            (rows, json!({ "n_grid": n_grid, "ratios": ratios, "shift": shift }))
        }
        Experiment::FprTpr => {
            let n_grid = if n_grid.is_empty() { &[100, 200, 500, 1000][..] } else { n_grid };
            let sk = match kind {
                ShiftKind::MeanShift => SyntheticKind::MeanShift(shift.unwrap_or(1.0)),
                ShiftKind::VarianceShift => SyntheticKind::VarianceShift(shift.unwrap_or(1.5)),
                ShiftKind::Null => SyntheticKind::Null,
            };
            let mut base = run_config(&settings)?;
            if settings.alternative.is_none() {
                base.alternative = Alternative::Greater;
            }
            if settings.k.is_none() {
                base.k = 30;
            }
            let arms = match settings.estimator {
                Some(_) => vec![base.estimator],
                None => psi_arms(),
            };
            let rows = experiments::fpr_tpr(sk, n_grid, &arms, &base, trials, seed, per_trial)?;
            (rows, json!({ "n_grid": n_grid, "kind": sk, "base": base }))
        }
        Experiment::Type2 => {
            let n_grid = if n_grid.is_empty() { &[100, 400, 800][..] } else { n_grid };
            let shift = shift.unwrap_or(experiments::TYPE2_SHIFT);
            let mut arms = psi_arms();
            arms.push(EstimatorSpec::Complete);
            let rows = experiments::type2(&arms, n_grid, shift, trials, seed)?;
            (rows, json!({ "n_grid": n_grid, "shift": shift, "level": 0.05 }))
        }
        Experiment::PvalueUniformity => {
            let mut setup = OracleSetup::default();
            if let Some(&n) = n_grid.first() {
                setup.n = n;
            }
            let mut cfg = run_config(&settings)?;
            if settings.estimator.is_none() && settings.r.is_none() {
                cfg.estimator = EstimatorSpec::Incomplete { ratio: 5.0 };
            }
            let rows = experiments::pvalue_uniformity(&setup, &cfg, trials, seed)?;
            (rows, json!({ "setup": setup, "run": cfg }))
        }
    };
    let name = experiment.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    let summary: Vec<&ResultRow> = rows.iter().filter(|r| r.trial.is_none()).collect();
    let config = json!({ "experiment": name, "trials": trials, "seed": seed, "settings": config });
    finish("simulate", &output_dir(&settings), config, Vec::new(), json!(summary), &rows, Vec::new(), started)
}

fn cmd_bench(n_grid: &[usize], reps: usize, settings: Settings) -> Result<()> {
    let started = (SystemTime::now(), Instant::now());
    if n_grid.is_empty() || n_grid.iter().any(|&n| n < 4) {
        return Err(CliError::Config("--n-grid entries must be at least 4".into()));
    }
    let seed = settings.seed.unwrap_or(0);
    let ests = [
        EstimatorSpec::Complete,
        EstimatorSpec::Block { block_size: None },
        EstimatorSpec::Linear,
        EstimatorSpec::Incomplete { ratio: 0.5 },
        EstimatorSpec::Incomplete { ratio: 10.0 },
    ];
    let rows = timing::bench(n_grid, &ests, reps, seed)?;
    let config = json!({ "n_grid": n_grid, "reps": reps, "seed": seed });
    // Timings vary run to run, so the summary is the table itself.
    finish("bench", &output_dir(&settings), config, Vec::new(), json!(rows), &rows, Vec::new(), started)
}

fn cmd_generate(kind: ShiftKind, n: usize, d: usize, n_true: usize, shift: Option<f64>, settings: Settings) -> Result<()> {
    let seed = settings.seed.unwrap_or(0);
    let spec = SyntheticSpec {
        kind: match kind {
            ShiftKind::MeanShift => SyntheticKind::MeanShift(shift.unwrap_or(1.0)),
            ShiftKind::VarianceShift => SyntheticKind::VarianceShift(shift.unwrap_or(1.5)),
            ShiftKind::Null => SyntheticKind::Null,
        },
        d,
        n_true: if kind == ShiftKind::Null { 0 } else { n_true },
        n,
        seed,
    };
    let data = generate(&spec)?;
    let names: Vec<String> = (0..d).map(|f| format!("f{f}")).collect();
    let named = |s: &SampleSet| SampleSet::with_names(d, s.as_sample_major().to_vec(), names.clone());
    let dir = output_dir(&settings);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    write_samples(&dir.join("x.csv"), &named(&data.x)?)?;
    write_samples(&dir.join("y.csv"), &named(&data.y)?)?;
    let truth: Vec<String> = data.true_features.iter().map(usize::to_string).collect();
    let path = dir.join("true_features.txt");
    std::fs::write(&path, truth.join(",") + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::FeaturePsi { x_file, y_file, true_features, settings } => {
            cmd_feature_psi(&x_file, y_file.as_deref(), &true_features, settings.resolve()?)
        }
        Command::SampleSelect { reference, candidates, settings } => {
            cmd_sample_select(&reference, &candidates, settings.resolve()?)
        }
        Command::Simulate { experiment, n_grid, kind, shift, ratios, per_trial, settings } => {
            cmd_simulate(experiment, &n_grid, kind, shift, &ratios, per_trial, settings.resolve()?)
        }
        Command::Bench { n_grid, reps, settings } => cmd_bench(&n_grid, reps, settings.resolve()?),
        Command::Generate { kind, n, d, n_true, shift, settings } => {
            cmd_generate(kind, n, d, n_true, shift, settings.resolve()?)
        }
    }
}
