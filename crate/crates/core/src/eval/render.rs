use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use super::EvalReport;
use crate::cohort::Label;

pub const REPORT_VERSION: u32 = 1;

const COLUMNS: [&str; 10] = [
    "tissue",
    "setting",
    "features",
    "F1-Sensitive",
    "F1-Resistant",
    "macro-F1",
    "weighted-F1",
    "accuracy",
    "n",
    "unparseable",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [
        ReportFormat::Json,
        ReportFormat::Csv,
        ReportFormat::Markdown,
    ];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" | "markdown-table" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

#[derive(Serialize)]
struct ReportFile<'a> {
    version: u32,
    reports: Vec<&'a EvalReport>,
}

fn row_order(a: &EvalReport, b: &EvalReport) -> std::cmp::Ordering {
    (&a.tissue, a.setting, a.feature_set).cmp(&(&b.tissue, b.setting, b.feature_set))
}

/// Rows ordered by tissue (LUAD, BRCA, COREAD, THCA, LGG, then others), setting and
/// feature set; input order breaks remaining ties.
fn ordered(reports: &[EvalReport]) -> Vec<&EvalReport> {
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by(|a, b| row_order(a, b));
    rows
}

/// Sort in place into the row order every format uses.
pub fn sort_reports(reports: &mut [EvalReport]) {
    reports.sort_by(row_order);
}

fn cells(r: &EvalReport) -> [String; 10] {
    [
        r.tissue.to_string(),
        r.setting.to_string(),
        r.feature_set.display_name(),
        format!("{:.4}", r.f1(Label::Sensitive)),
        format!("{:.4}", r.f1(Label::Resistant)),
        format!("{:.4}", r.macro_f1),
        format!("{:.4}", r.weighted_f1),
        format!("{:.4}", r.accuracy),
        r.n.to_string(),
        r.counts.unparseable.to_string(),
    ]
}

/// Render reports as bytes; identical input always yields identical output.
pub fn render_report(reports: &[EvalReport], format: ReportFormat) -> Vec<u8> {
    let rows = ordered(reports);
    match format {
        ReportFormat::Json => {
            let file = ReportFile {
                version: REPORT_VERSION,
                reports: rows,
            };
            let mut out = serde_json::to_vec_pretty(&file).expect("reports encode");
            out.push(b'\n');
            out
        }
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(COLUMNS).expect("in-memory write");
            for r in rows {
                writer.write_record(cells(r)).expect("in-memory write");
            }
            writer.into_inner().expect("in-memory flush")
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            let _ = writeln!(out, "| {} |", COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(COLUMNS.len()));
            for r in rows {
                let _ = writeln!(out, "| {} |", cells(r).join(" | "));
            }
            out.into_bytes()
        }
    }
}
