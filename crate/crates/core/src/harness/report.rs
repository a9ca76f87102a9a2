//! CSV report rows.
//!
//! Column order is fixed. The first header cell is the schema token
//! [`CSV_SCHEMA`]; the matching cell of every data row repeats the scenario
//! name so the column is never empty.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

/// Bumped whenever columns change.
pub const CSV_SCHEMA: &str = "pwdlab-report-v1";

pub const COLUMNS: [&str; 15] = [
    CSV_SCHEMA,
    "trial",
    "seed",
    "pipeline",
    "err_t",
    "err_h",
    "kl0",
    "kl1",
    "chosen_provenance",
    "chosen_hypothesis",
    "list_size",
    "distinct_models",
    "m_sel",
    "draws_used",
    "runtime_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub scenario: String,
    pub trial: usize,
    pub seed: u64,
    pub pipeline: String,
    /// Exact `err(T)` of the chosen model, in bits.
    pub err_t: f64,
    /// Classification error of the chosen hypothesis.
    pub err_h: f64,
    /// `KL(P0 || Q0)` and `KL(P1 || Q1)`.
    pub kl0: f64,
    pub kl1: f64,
    pub chosen_provenance: String,
    pub chosen_hypothesis: String,
    pub list_size: usize,
    pub distinct_models: usize,
    pub m_sel: usize,
    pub draws_used: u64,
    /// Only recorded in verbose runs so default reports stay reproducible.
    pub runtime_ms: Option<u128>,
}

impl ReportRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.scenario.clone(),
            self.trial.to_string(),
            self.seed.to_string(),
            self.pipeline.clone(),
            format!("{:.9}", self.err_t),
            format!("{:.9}", self.err_h),
            format!("{:.9}", self.kl0),
            format!("{:.9}", self.kl1),
            self.chosen_provenance.clone(),
            self.chosen_hypothesis.clone(),
            self.list_size.to_string(),
            self.distinct_models.to_string(),
            self.m_sel.to_string(),
            self.draws_used.to_string(),
            self.runtime_ms.map(|v| v.to_string()).unwrap_or_default(),
        ]
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes the header and rows in the given order.
pub fn write_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.record()).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[ReportRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}
