//! Machine-readable reports: metrics JSON, and CSV/JSON tables for the
//! comparison commands. No wall-clock state goes into any report.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use relex_core::config::RunConfig;
use relex_core::corpus::Metrics;

#[derive(Debug, Serialize)]
pub struct MetricsReport<'a> {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub n_sentences: usize,
    pub config_digest: &'a str,
    pub config: &'a RunConfig,
}

impl<'a> MetricsReport<'a> {
    pub fn new(metrics: &Metrics, n_sentences: usize, digest: &'a str, config: &'a RunConfig) -> Self {
        MetricsReport {
            precision: metrics.precision,
            recall: metrics.recall,
            f1: metrics.f1,
            tp: metrics.tp,
            fp: metrics.fp,
            fn_: metrics.fn_,
            n_sentences,
            config_digest: digest,
            config,
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// One comparison row; shared by ablate, lowres, and memcurve tables.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub label: String,
    pub status: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Row {
    pub fn ok(label: impl Into<String>, m: &Metrics) -> Self {
        Row {
            label: label.into(),
            status: "ok".into(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
        }
    }

    pub fn failed(label: impl Into<String>, reason: &str) -> Self {
        Row {
            label: label.into(),
            status: format!("failed: {reason}"),
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            tp: 0,
            fp: 0,
            fn_: 0,
        }
    }
}

pub fn write_rows_csv(rows: &[Row], label_header: &str, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    writer.write_record([label_header, "status", "precision", "recall", "f1", "tp", "fp", "fn"])?;
    for row in rows {
        writer.write_record([
            row.label.as_str(),
            row.status.as_str(),
            &format!("{:.6}", row.precision),
            &format!("{:.6}", row.recall),
            &format!("{:.6}", row.f1),
            &row.tp.to_string(),
            &row.fp.to_string(),
            &row.fn_.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct TableReport<'a> {
    pub rows: &'a [Row],
    pub config_digest: &'a str,
    pub config: &'a RunConfig,
}
