use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::train::MetricsRecord;

use super::FormatError;

pub const METRICS_HEADER: &str = "epoch,train_loss,val_nmse_linear,val_nmse_db,ber,lr,wall_time_s";

/// Renders metrics as CSV: one header row, one row per record, `.` decimal
/// separator, shortest round-trip float formatting, trailing newline.
pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.epoch, r.train_loss, r.val_nmse_linear, r.val_nmse_db, r.bit_error_rate, r.lr, r.wall_time_seconds
        );
    }
    out
}

pub fn export_metrics_csv(records: &[MetricsRecord], path: impl AsRef<Path>) -> Result<(), FormatError> {
    if records.is_empty() {
        return Err(FormatError::Invalid("no metrics to export".into()));
    }
    fs::write(path, metrics_csv(records))?;
    Ok(())
}

/// Minimal CSV table for result grids.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(|s| s.to_string()).collect();
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), FormatError> {
        fs::write(path, self.render())?;
        Ok(())
    }
}
