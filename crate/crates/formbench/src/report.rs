//! Report documents written by `evaluate` and `analyze`, and their table
//! renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use formbench_core::metrics::{EvaluationRecord, MetricsSummary};
use formbench_core::stats::StatsReport;
use serde::{Deserialize, Serialize};

use crate::harness::BrowserInfo;

/// `records.json`: every record of an `evaluate` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordsFile {
    pub run_config: serde_json::Value,
    pub browser: BrowserInfo,
    pub records: Vec<EvaluationRecord>,
}

/// `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub run_config: serde_json::Value,
    pub browser: BrowserInfo,
    pub summary: MetricsSummary,
    /// Failing records per error category.
    pub taxonomy: BTreeMap<String, usize>,
}

/// Output of `analyze`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub run_config: serde_json::Value,
    /// Configuration of the run that produced the records.
    pub source_run_config: serde_json::Value,
    pub summary: MetricsSummary,
    pub taxonomy: BTreeMap<String, usize>,
    /// Error percentage per field kind.
    pub per_field_type_errors: BTreeMap<String, f64>,
    pub corpus_stats: StatsReport,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn count_table(title: &str, rows: &BTreeMap<String, usize>) -> String {
    let mut out = String::new();
    let w = rows.keys().map(String::len).max().unwrap_or(0).max(title.len());
    let _ = writeln!(out, "| {title:<w$} | Count |");
    let _ = writeln!(out, "|{}|------:|", "-".repeat(w + 2));
    for (k, v) in rows {
        let _ = writeln!(out, "| {k:<w$} | {v:>5} |");
    }
    out
}

fn pct_table(title: &str, rows: &BTreeMap<String, f64>) -> String {
    let mut out = String::new();
    let w = rows.keys().map(String::len).max().unwrap_or(0).max(title.len());
    let _ = writeln!(out, "| {title:<w$} | Error (%) |");
    let _ = writeln!(out, "|{}|----------:|", "-".repeat(w + 2));
    for (k, v) in rows {
        let _ = writeln!(out, "| {k:<w$} | {v:>9.2} |");
    }
    out
}

impl EvaluationSummary {
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "browser: {} {} ({})\n\n",
            self.browser.browser_name, self.browser.browser_version, self.browser.webdriver_url
        );
        out.push_str(&self.summary.to_table());
        if !self.taxonomy.is_empty() {
            out.push('\n');
            out.push_str(&count_table("Error category", &self.taxonomy));
        }
        out
    }
}

impl AnalysisReport {
    pub fn to_table(&self) -> String {
        let mut out = self.summary.to_table();
        out.push('\n');
        out.push_str(&count_table("Error category", &self.taxonomy));
        out.push('\n');
        out.push_str(&pct_table("Field type", &self.per_field_type_errors));
        out.push('\n');
        let dist: BTreeMap<String, f64> = self
            .corpus_stats
            .field_type_distribution
            .iter()
            .map(|(k, v)| (k.as_str().to_string(), v * 100.0))
            .collect();
        let w = dist.keys().map(String::len).max().unwrap_or(0).max("Field type".len());
        let _ = writeln!(out, "| {:<w$} | Share (%) |", "Field type");
        let _ = writeln!(out, "|{}|----------:|", "-".repeat(w + 2));
        for (k, v) in &dist {
            let _ = writeln!(out, "| {k:<w$} | {v:>9.2} |");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_align() {
        let rows: BTreeMap<String, usize> = [("wrapper_misbind".to_string(), 3), ("other".to_string(), 12)].into();
        let t = count_table("Error category", &rows);
        let widths: Vec<usize> = t.lines().map(str::len).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]), "{t}");
    }
}
