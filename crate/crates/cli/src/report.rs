//! Run reports and their csv / markdown / json renderings.

use serde::{Deserialize, Serialize};

/// Differential verification outcome for a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Match,
    Mismatch(String),
}

impl Verdict {
    pub fn is_match(&self) -> bool {
        matches!(self, Verdict::Match)
    }

    pub fn as_text(&self) -> String {
        match self {
            Verdict::Match => "match".to_string(),
            Verdict::Mismatch(diff) => format!("MISMATCH({diff})"),
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.as_text())
    }
}

impl<'de> Deserialize<'de> for Verdict {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Verdict, D::Error> {
        let text = String::deserialize(deserializer)?;
        if text == "match" {
            Ok(Verdict::Match)
        } else if let Some(diff) = text
            .strip_prefix("MISMATCH(")
            .and_then(|rest| rest.strip_suffix(')'))
        {
            Ok(Verdict::Mismatch(diff.to_string()))
        } else {
            Err(serde::de::Error::custom(format!("bad verdict {text:?}")))
        }
    }
}

/// One engine × query run: timings, counters, and the verification verdict.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub engine: String,
    pub query: String,
    /// Lineitem rows in the dataset the run executed against.
    pub rows: u64,
    pub median_ns: u64,
    pub min_ns: u64,
    pub source_rows_read: u64,
    pub materialized_rows: u64,
    pub steps_yield: u64,
    pub steps_skip: u64,
    pub boxed_step_allocs: u64,
    pub verdict: Verdict,
    pub result_digest: String,
    /// Wall time of each repetition, sorted ascending.
    pub times_ns: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

impl ReportFormat {
    pub fn parse(name: &str) -> Option<ReportFormat> {
        match name {
            "csv" => Some(ReportFormat::Csv),
            "markdown" => Some(ReportFormat::Markdown),
            "json" => Some(ReportFormat::Json),
            _ => None,
        }
    }
}

const COLUMNS: [&str; 11] = [
    "engine",
    "query",
    "rows",
    "median_ns",
    "min_ns",
    "source_rows_read",
    "materialized_rows",
    "steps_yield",
    "steps_skip",
    "boxed_step_allocs",
    "verdict",
];

fn cells(report: &RunReport) -> [String; 11] {
    [
        report.engine.clone(),
        report.query.clone(),
        report.rows.to_string(),
        report.median_ns.to_string(),
        report.min_ns.to_string(),
        report.source_rows_read.to_string(),
        report.materialized_rows.to_string(),
        report.steps_yield.to_string(),
        report.steps_skip.to_string(),
        report.boxed_step_allocs.to_string(),
        report.verdict.as_text(),
    ]
}

/// Renders reports in the requested format with a pinned column order.
/// An empty report list still yields the header.
pub fn report_emit(reports: &[RunReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = COLUMNS.join(",");
            out.push('\n');
            for report in reports {
                out.push_str(&cells(report).join(","));
                out.push('\n');
            }
            out
        }
        ReportFormat::Markdown => {
            let mut out = format!("| {} |\n", COLUMNS.join(" | "));
            out.push_str(&format!("|{}\n", " --- |".repeat(COLUMNS.len())));
            for report in reports {
                out.push_str(&format!("| {} |\n", cells(report).join(" | ")));
            }
            out
        }
        ReportFormat::Json => {
            serde_json::to_string_pretty(reports).expect("reports serialize")
        }
    }
}
