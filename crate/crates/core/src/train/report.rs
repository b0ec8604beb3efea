use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::data::SplitKind;
use crate::error::{Error, Result};
use crate::model::ModelConfig;

use super::metrics::SplitMetrics;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub train_seconds: f64,
    pub eval_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub split: SplitKind,
    pub metrics: SplitMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub config: ModelConfig,
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub splits: Vec<SplitEntry>,
    pub timings: Timings,
}

impl ModelReport {
    pub fn metrics(&self, split: SplitKind) -> Option<&SplitMetrics> {
        self.splits.iter().find(|e| e.split == split).map(|e| &e.metrics)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub title: String,
    pub horizon: usize,
    pub models: Vec<ModelReport>,
}

impl ExperimentReport {
    pub fn new(title: impl Into<String>, horizon: usize) -> Self {
        Self {
            title: title.into(),
            horizon,
            models: Vec::new(),
        }
    }

    pub fn push(&mut self, model: ModelReport) -> Result<()> {
        for entry in &model.splits {
            if entry.metrics.mape.len() != self.horizon {
                return Err(Error::Config(format!(
                    "{} {} MAPE has {} steps, report horizon is {}",
                    model.name,
                    entry.split.label(),
                    entry.metrics.mape.len(),
                    self.horizon
                )));
            }
        }
        self.models.push(model);
        Ok(())
    }

    /// Copy with wall-clock timings zeroed; everything left is a
    /// deterministic function of seed, config and data.
    pub fn canonical(&self) -> Self {
        let mut out = self.clone();
        for m in &mut out.models {
            m.timings = Timings::default();
        }
        out
    }

    /// Test-split MAPE with one row per step ahead and one column per model.
    pub fn mape_table(&self) -> MapeTable {
        let columns = self.models.iter().map(|m| m.name.clone()).collect();
        let rows: Vec<Vec<f64>> = (0..self.horizon)
            .map(|s| {
                self.models
                    .iter()
                    .map(|m| m.metrics(SplitKind::Test).map_or(f64::NAN, |x| x.mape[s]))
                    .collect()
            })
            .collect();
        let best = rows.iter().map(|r| argmin(r)).collect();
        MapeTable { columns, rows, best }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapeTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Column index of the lowest value in each row.
    pub best: Vec<Option<usize>>,
}

fn argmin(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report).expect("report serializes"),
        ReportFormat::Table => render_tables(report),
    }
}

pub fn parse_report(text: &str) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(text)?)
}

fn render_tables(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let name_width = report
        .models
        .iter()
        .map(|m| m.name.len())
        .max()
        .unwrap_or(5)
        .max(5);
    let _ = writeln!(out, "{}", report.title);
    let _ = writeln!(out);
    let _ = writeln!(out, "{:<name_width$}  {:<5}  {:>10}  {:>10}", "Model", "Split", "MSE", "MAE");
    for m in &report.models {
        for e in &m.splits {
            let _ = writeln!(
                out,
                "{:<name_width$}  {:<5}  {:>10.4}  {:>10.4}",
                m.name,
                e.split.label(),
                e.metrics.mse,
                e.metrics.mae
            );
        }
    }
    let table = report.mape_table();
    let _ = writeln!(out);
    let _ = writeln!(out, "Re-scaled test MAPE (%) per step ahead; * marks the lowest");
    let col = table.columns.iter().map(String::len).max().unwrap_or(0).max(10);
    let _ = write!(out, "{:<4}", "Step");
    for c in &table.columns {
        let _ = write!(out, "  {c:>col$}");
    }
    let _ = writeln!(out);
    for (s, row) in table.rows.iter().enumerate() {
        let _ = write!(out, "{:<4}", s + 1);
        for (j, v) in row.iter().enumerate() {
            let cell = if v.is_finite() {
                let mark = if table.best[s] == Some(j) { "*" } else { "" };
                format!("{v:.4}{mark}")
            } else {
                "-".to_string()
            };
            let _ = write!(out, "  {cell:>col$}");
        }
        let _ = writeln!(out);
    }
    out
}
