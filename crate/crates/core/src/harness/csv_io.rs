//! Report CSV: header `method,n_evals,mean_mse,std,ci_half_width,trials`,
//! one row per method and checkpoint, `\n` line endings, floats in shortest
//! round-trip form.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentReport, HarnessError};

pub const HEADER: [&str; 6] = ["method", "n_evals", "mean_mse", "std", "ci_half_width", "trials"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub method: String,
    pub n_evals: u64,
    pub mean_mse: f64,
    pub std: f64,
    pub ci_half_width: f64,
    pub trials: usize,
}

fn csv_error(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Serializes rows, sorted by method then evaluation count.
pub fn write_rows<W: Write>(out: W, rows: &[CsvRow]) -> Result<(), csv::Error> {
    let mut rows: Vec<&CsvRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.method.cmp(&b.method).then(a.n_evals.cmp(&b.n_evals)));
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(HEADER)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn emit_csv(report: &ExperimentReport, path: &Path) -> Result<(), HarnessError> {
    let mut bytes = Vec::new();
    write_rows(&mut bytes, &report.rows()).map_err(|e| csv_error(path, e))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, csv::Error> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    reader.deserialize().collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let header = text.lines().next().unwrap_or_default();
    if header != HEADER.join(",") {
        return Err(csv_error(path, format!("unexpected header {header:?}")));
    }
    parse_csv(&text).map_err(|e| csv_error(path, e))
}
