//! Command-line harness around `mmdsel-core`: CSV ingestion, the feature
//! screening and sample selection pipelines, Monte-Carlo experiments and
//! timing.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod pipeline;
pub mod report;
pub mod timing;

pub use config::{RunConfig, Settings};
pub use error::CliError;
