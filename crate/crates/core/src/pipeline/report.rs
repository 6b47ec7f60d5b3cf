//! CSV and JSON outputs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::eval::{Curves, EvalReport, EvalRow};
use super::intervals::DynamicTable;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["T", "k", "theta_hat", "Q", "psi", "error", "valid_bin_count"];

/// Writes the per-cluster rows as CSV.
pub fn write_rows_csv<W: Write>(rows: &[EvalRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::format(format!("CSV: {other:?}")),
    };
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.t_mid_s.to_string(),
            r.k.to_string(),
            r.theta_hat_deg.to_string(),
            r.quality.to_string(),
            r.psi_deg.to_string(),
            r.error_deg.to_string(),
            r.valid_bin_count.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a super::config::PipelineConfig,
    interval_count: usize,
    active_intervals: usize,
    intervals_with_valid_bins: usize,
    rows: usize,
    misses: usize,
    pr: Option<f64>,
    n_low: Option<f64>,
    curves: &'a Curves,
    dynamic_table: &'a DynamicTable,
}

/// JSON summary: config echo, counts, `Pr`, `n̄_low`, curves and the dynamic table.
pub fn summary_json(report: &EvalReport) -> Result<String> {
    let s = Summary {
        config: &report.config,
        interval_count: report.interval_count,
        active_intervals: report.active_intervals,
        intervals_with_valid_bins: report.intervals_with_valid_bins,
        rows: report.rows.len(),
        misses: report.misses,
        pr: report.pr,
        n_low: report.n_low,
        curves: &report.curves,
        dynamic_table: &report.dynamic_table,
    };
    let mut text = serde_json::to_string_pretty(&s).map_err(|e| Error::format(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Writes `report` to `csv_path` and `json_path`.
pub fn emit_report(report: &EvalReport, csv_path: &Path, json_path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(csv_path)?);
    write_rows_csv(&report.rows, file)?;
    std::fs::write(json_path, summary_json(report)?)?;
    Ok(())
}
