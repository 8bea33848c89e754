//! Reading count tables and simulation settings.
//!
//! Tables come either as CSV (K rows of K numbers, optional header row) or
//! as JSON of the form `{"cells": [[...], ...]}`. The format is sniffed from
//! the first non-blank character.

use std::path::Path;

use thiserror::Error;

use crate::sim::SimulationSetting;
use crate::table::{ContingencyTable, TableError};

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}{}: {message}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Csv { line: u64, column: Option<usize>, message: String },
    #[error("line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("{0}")]
    Table(#[from] TableError),
}

pub fn parse_table(text: &str) -> Result<ContingencyTable, InputError> {
    if text.trim_start().starts_with('{') {
        parse_json_table(text)
    } else {
        parse_csv_table(text)
    }
}

pub fn load_table(path: &Path) -> Result<ContingencyTable, InputError> {
    parse_table(&read(path)?)
}

fn read(path: &Path) -> Result<String, InputError> {
    std::fs::read_to_string(path).map_err(|source| InputError::Io { path: path.display().to_string(), source })
}

fn json_error(e: serde_json::Error) -> InputError {
    InputError::Json { line: e.line(), column: e.column(), message: e.to_string() }
}

#[derive(serde::Deserialize)]
struct RawTable {
    cells: Vec<Vec<f64>>,
}

pub fn parse_json_table(text: &str) -> Result<ContingencyTable, InputError> {
    let raw: RawTable = serde_json::from_str(text).map_err(json_error)?;
    Ok(ContingencyTable::new(raw.cells)?)
}

/// Parses K lines of K comma-separated non-negative numbers. A first line
/// containing any non-numeric field is taken as a header and skipped.
pub fn parse_csv_table(text: &str) -> Result<ContingencyTable, InputError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<(u64, Vec<f64>)> = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| InputError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            column: None,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let is_header = index == 0 && record.iter().any(|f| f.parse::<f64>().is_err());
        if is_header {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| InputError::Csv {
                line,
                column: Some(col + 1),
                message: format!("`{field}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(InputError::Csv { line, column: Some(col + 1), message: "count must be finite".into() });
            }
            if value < 0.0 {
                return Err(InputError::Csv {
                    line,
                    column: Some(col + 1),
                    message: format!("negative count {value}"),
                });
            }
            row.push(value);
        }
        rows.push((line, row));
    }
    let k = rows.len();
    if k < 2 {
        return Err(InputError::Table(TableError::TooFewCategories(k)));
    }
    for (line, row) in &rows {
        if row.len() != k {
            return Err(InputError::Csv {
                line: *line,
                column: None,
                message: format!("row has {} entries but the table has {k} rows (must be square)", row.len()),
            });
        }
    }
    Ok(ContingencyTable::new(rows.into_iter().map(|(_, r)| r).collect())?)
}

/// Reads a simulation setting from JSON:
/// `{"n": 30, "alpha": [...], "pi1": [...], "pi2": [...]}` with optional
/// `id` and `label`.
pub fn parse_setting(text: &str) -> Result<SimulationSetting, InputError> {
    serde_json::from_str(text).map_err(json_error)
}

pub fn load_setting(path: &Path) -> Result<SimulationSetting, InputError> {
    parse_setting(&read(path)?)
}
