//! CSV ingestion: select named columns, coerce the binary outcome, and
//! drop rows with missing or non-numeric values in any selected column.

use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Cell values treated as missing data (case-insensitive, after trimming).
const MISSING_TOKENS: [&str; 5] = ["", "na", "n/a", "nan", "null"];

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.contains(&cell.to_ascii_lowercase().as_str())
}

/// Outcome of coercing one outcome cell.
enum OutcomeCell {
    Value(f64),
    Missing,
}

/// Coerce an outcome cell to 0/1. Accepts numeric 0/1 and yes/no
/// (case-insensitive); missing tokens drop the row; anything else is an
/// error because it suggests the wrong column was selected.
fn coerce_outcome(cell: &str, row: usize, column: &str) -> Result<OutcomeCell> {
    let trimmed = cell.trim();
    if is_missing(trimmed) {
        return Ok(OutcomeCell::Missing);
    }
    match trimmed.to_ascii_lowercase().as_str() {
        "yes" => return Ok(OutcomeCell::Value(1.0)),
        "no" => return Ok(OutcomeCell::Value(0.0)),
        _ => {}
    }
    if let Ok(v) = trimmed.parse::<f64>() {
        if v == 0.0 || v == 1.0 {
            return Ok(OutcomeCell::Value(v));
        }
        return Err(Error::InvalidInput(format!(
            "outcome column '{column}' has value {v} at data row {row}; \
             expected a binary outcome coded 0/1 or yes/no"
        )));
    }
    Err(Error::InvalidInput(format!(
        "outcome column '{column}' has value '{trimmed}' at data row {row}; \
         expected a binary outcome coded 0/1 or yes/no"
    )))
}

/// Locate `name` in the header, rejecting absent or ambiguous names.
fn column_index(headers: &[String], name: &str, path: &str) -> Result<usize> {
    let mut hits = headers.iter().enumerate().filter(|(_, h)| h.as_str() == name);
    match (hits.next(), hits.next()) {
        (Some((idx, _)), None) => Ok(idx),
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "column '{name}' appears more than once in the header of {path}"
        ))),
        (None, _) => Err(Error::Config(format!(
            "column '{name}' not found in {path}; available columns: {}",
            headers.join(", ")
        ))),
    }
}

/// Read a CSV file into a [`Dataset`] holding `predictor_columns` (in the
/// given order) and the coerced outcome.
///
/// Rows with a missing or non-numeric value in any selected column are
/// dropped and counted ([`Dataset::dropped_rows`]). A non-missing outcome
/// that cannot be coerced to 0/1 is an error, as is an empty selection
/// after dropping.
pub fn ingest_csv(
    path: &Path,
    outcome_column: &str,
    predictor_columns: &[String],
) -> Result<Dataset> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })?;
    ingest_reader(file, &display, outcome_column, predictor_columns)
}

fn ingest_reader<R: std::io::Read>(
    reader: R,
    path: &str,
    outcome_column: &str,
    predictor_columns: &[String],
) -> Result<Dataset> {
    for (j, name) in predictor_columns.iter().enumerate() {
        if predictor_columns[..j].contains(name) {
            return Err(Error::Config(format!(
                "predictor column '{name}' requested more than once"
            )));
        }
        if name == outcome_column {
            return Err(Error::Config(format!(
                "column '{name}' cannot be both outcome and predictor"
            )));
        }
    }

    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let wrap_csv = |source: csv::Error| Error::Csv {
        path: path.to_string(),
        source,
    };
    let headers: Vec<String> = csv_reader
        .headers()
        .map_err(wrap_csv)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let outcome_idx = column_index(&headers, outcome_column, path)?;
    let predictor_idx: Vec<usize> = predictor_columns
        .iter()
        .map(|name| column_index(&headers, name, path))
        .collect::<Result<_>>()?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut outcomes: Vec<f64> = Vec::new();
    let mut dropped = 0usize;

    for (row_no, record) in csv_reader.records().enumerate() {
        let record = record.map_err(wrap_csv)?;
        let outcome_cell = record.get(outcome_idx).unwrap_or("");
        let outcome = match coerce_outcome(outcome_cell, row_no, outcome_column)? {
            OutcomeCell::Value(v) => v,
            OutcomeCell::Missing => {
                dropped += 1;
                continue;
            }
        };
        let mut values = Vec::with_capacity(predictor_idx.len());
        let mut complete = true;
        for &idx in &predictor_idx {
            let cell = record.get(idx).unwrap_or("").trim();
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() && !is_missing(cell) => values.push(v),
                _ => {
                    complete = false;
                    break;
                }
            }
        }
        if !complete {
            dropped += 1;
            continue;
        }
        rows.push(values);
        outcomes.push(outcome);
    }

    if rows.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no usable rows remain in {path} after dropping {dropped} incomplete row(s)"
        )));
    }

    let n = rows.len();
    let d = predictor_columns.len();
    let mut x = Array2::zeros((n, d));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    let y = Array1::from_vec(outcomes);
    let mut data = Dataset::new(x, y, predictor_columns.to_vec())?;
    data.set_dropped_rows(dropped);
    Ok(data)
}
