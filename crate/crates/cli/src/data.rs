//! CSV input and output of sample sets.

use std::path::Path;

use mmdsel_core::SampleSet;

use crate::config::Layout;
use crate::error::{CliError, Result};

pub const DEFAULT_LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone)]
pub enum Loaded {
    Single(SampleSet),
    /// Label 0 rows and label 1 rows.
    Pair { x: SampleSet, y: SampleSet },
}

struct Table {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::data(path, format!("{other:?}")),
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::data(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::data(path, "empty file: no header row"));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::data(path, e.to_string()))?;
        if rec.len() != header.len() {
            // Line 1 is the header.
            return Err(CliError::data(
                path,
                format!("ragged row at line {}: {} fields, header has {}", i + 2, rec.len(), header.len()),
            ));
        }
        rows.push(rec);
    }
    if rows.is_empty() {
        return Err(CliError::data(path, "no data rows"));
    }
    Ok(Table { header, rows })
}

fn parse_cell(path: &Path, line: usize, column: &str, cell: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(CliError::data(
            path,
            format!("non-finite value `{cell}` at line {line}, column `{column}`"),
        )),
        Err(_) => Err(CliError::data(
            path,
            format!("non-numeric value `{cell}` at line {line}, column `{column}`"),
        )),
    }
}

fn build(path: &Path, names: Vec<String>, values: Vec<f64>) -> Result<SampleSet> {
    let d = names.len();
    SampleSet::with_names(d, values, names).map_err(|e| CliError::data(path, e.to_string()))
}

/// Reads a CSV with a header of feature names and one sample per row.
pub fn load_samples(path: &Path, layout: Layout, label_column: Option<&str>) -> Result<Loaded> {
    let table = read_table(path)?;
    match layout {
        Layout::Rows => {
            let mut values = Vec::with_capacity(table.rows.len() * table.header.len());
            for (i, rec) in table.rows.iter().enumerate() {
                for (cell, name) in rec.iter().zip(&table.header) {
                    values.push(parse_cell(path, i + 2, name, cell)?);
                }
            }
            Ok(Loaded::Single(build(path, table.header, values)?))
        }
        Layout::Labeled => {
            let label = label_column.unwrap_or(DEFAULT_LABEL_COLUMN);
            let li = table
                .header
                .iter()
                .position(|h| h == label)
                .ok_or_else(|| CliError::data(path, format!("label column `{label}` not found")))?;
            let names: Vec<String> = table
                .header
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != li)
                .map(|(_, h)| h.clone())
                .collect();
            if names.is_empty() {
                return Err(CliError::data(path, "no feature columns besides the label"));
            }
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for (i, rec) in table.rows.iter().enumerate() {
                let line = i + 2;
                let target = match rec[li].parse::<f64>() {
                    Ok(v) if v == 0.0 => &mut xs,
                    Ok(v) if v == 1.0 => &mut ys,
                    _ => {
                        return Err(CliError::data(
                            path,
                            format!("unknown label `{}` at line {line} (expected 0 or 1)", &rec[li]),
                        ))
                    }
                };
                for (j, cell) in rec.iter().enumerate().filter(|&(j, _)| j != li) {
                    target.push(parse_cell(path, line, &table.header[j], cell)?);
                }
            }
            if xs.is_empty() || ys.is_empty() {
                return Err(CliError::data(path, "labeled file must contain both label 0 and label 1 rows"));
            }
            Ok(Loaded::Pair { x: build(path, names.clone(), xs)?, y: build(path, names, ys)? })
        }
    }
}

/// Loads a file that must hold a single sample set.
pub fn load_rows(path: &Path) -> Result<SampleSet> {
    match load_samples(path, Layout::Rows, None)? {
        Loaded::Single(s) => Ok(s),
        Loaded::Pair { .. } => unreachable!("rows layout yields one set"),
    }
}

/// Writes `set` with its feature names as the header.
pub fn write_samples(path: &Path, set: &SampleSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::data(path, e.to_string()))?;
    let io = |e: csv::Error| CliError::data(path, e.to_string());
    w.write_record(set.feature_names()).map_err(io)?;
    for s in set.samples() {
        w.write_record(s.iter().map(|v| format!("{v:?}"))).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
