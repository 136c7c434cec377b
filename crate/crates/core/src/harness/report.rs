//! Evaluation report and its text, CSV and JSON renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{MetricSummary, TTestKind};

use super::EvaluationConfig;

/// Name of the row that scores the sketches themselves.
pub const SKETCH_BASELINE: &str = "Conceptual Sketches";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub name: String,
    pub content: Option<MetricSummary>,
    pub fid: Option<f64>,
    pub diversity: Option<MetricSummary>,
    /// Values the content summary and significance tests were computed from.
    pub content_samples: Vec<f64>,
    /// Per-sketch structural diversity, in render group order.
    pub diversity_samples: Vec<f64>,
    pub warnings: Vec<String>,
}

impl MethodRow {
    pub fn new(name: impl Into<String>) -> Self {
        MethodRow {
            name: name.into(),
            content: None,
            fid: None,
            diversity: None,
            content_samples: Vec::new(),
            diversity_samples: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    ContentDistance,
    StructuralDiversity,
}

impl Metric {
    pub fn label(&self) -> &'static str {
        match self {
            Metric::ContentDistance => "content distance",
            Metric::StructuralDiversity => "structural diversity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceEntry {
    pub metric: Metric,
    pub method_a: String,
    pub method_b: String,
    pub test: crate::stats::TTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSizes {
    pub real_images: usize,
    pub sketches: usize,
    pub methods: Vec<MethodSize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSize {
    pub name: String,
    pub render_groups: usize,
    pub renders: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config: EvaluationConfig,
    pub corpus: CorpusSizes,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<MethodRow>,
    pub significance: Vec<SignificanceEntry>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

impl EvaluationReport {
    pub fn row(&self, name: &str) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::argument(format!(
                "unknown report format '{other}', expected text, csv or json"
            ))),
        }
    }
}

pub fn render_report(report: &EvaluationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => render_json(report),
    }
}

fn summary_cell(s: &Option<MetricSummary>) -> String {
    match s {
        Some(s) => format!("{:.2} ± {:.2}", s.mean, s.std),
        None => "n/a".to_string(),
    }
}

fn pad(s: &str, width: usize) -> String {
    let len = s.chars().count();
    format!("{s}{}", " ".repeat(width.saturating_sub(len)))
}

fn render_text(report: &EvaluationReport) -> String {
    let header = [
        "Method",
        "Content Distance ↓",
        "FID ↓",
        "Structural Diversity ↑",
    ];
    let cells: Vec<[String; 4]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.name.clone(),
                summary_cell(&r.content),
                r.fid
                    .map_or_else(|| "n/a".to_string(), |f| format!("{f:.2}")),
                summary_cell(&r.diversity),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cols: [&str; 4]| -> String {
        let parts: Vec<String> = cols.iter().zip(widths).map(|(c, w)| pad(c, w)).collect();
        parts.join(" | ").trim_end().to_string()
    };

    let mut out = String::new();
    out.push_str(&line(header));
    out.push('\n');
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&rule.join("-+-"));
    out.push('\n');
    for row in &cells {
        out.push_str(&line([&row[0], &row[1], &row[2], &row[3]]));
        out.push('\n');
    }

    if !report.significance.is_empty() {
        let cfg = &report.provenance.config;
        let kind = match cfg.test_kind {
            TTestKind::Welch => "Welch",
            TTestKind::Student => "Student (pooled)",
        };
        let _ = writeln!(
            out,
            "\nSignificance ({kind} two-tailed t-test, alpha = {}):",
            cfg.alpha
        );
        for s in &report.significance {
            let _ = writeln!(
                out,
                "  {:<20} {} vs {}: t = {:.3}, df = {:.2}, p = {:.4}{}",
                s.metric.label(),
                s.method_a,
                s.method_b,
                s.test.t,
                s.test.df,
                s.test.p,
                if s.test.significant { "  *" } else { "" }
            );
        }
    }

    let warnings: Vec<String> = report
        .warnings
        .iter()
        .cloned()
        .chain(
            report
                .rows
                .iter()
                .flat_map(|r| r.warnings.iter().map(move |w| format!("{}: {w}", r.name))),
        )
        .collect();
    if !warnings.is_empty() {
        out.push_str("\nWarnings:\n");
        for w in warnings {
            let _ = writeln!(out, "  - {w}");
        }
    }
    out
}

fn render_csv(report: &EvaluationReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    w.write_record([
        "method",
        "content_mean",
        "content_std",
        "fid",
        "diversity_mean",
        "diversity_std",
    ])
    .expect("in-memory csv write");
    for r in &report.rows {
        w.write_record([
            r.name.clone(),
            opt(r.content.map(|s| s.mean)),
            opt(r.content.map(|s| s.std)),
            opt(r.fid),
            opt(r.diversity.map(|s| s.mean)),
            opt(r.diversity.map(|s| s.std)),
        ])
        .expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

fn render_json(report: &EvaluationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn parse_json_report(text: &str) -> Result<EvaluationReport> {
    serde_json::from_str(text).map_err(|e| Error::Format(format!("invalid report JSON: {e}")))
}
