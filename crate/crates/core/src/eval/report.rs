use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{class_metrics, macro_average, round3, ClassMetrics, ConfusionMatrix};
use crate::train::Approach;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionPair {
    pub reference_negative: ConfusionMatrix,
    pub reference_positive: ConfusionMatrix,
}

/// Per-class and macro-averaged metrics of one approach.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub approach: Approach,
    pub negative: ClassMetrics<f64>,
    pub positive: ClassMetrics<f64>,
    #[serde(rename = "macro")]
    pub macro_avg: ClassMetrics<f64>,
    pub confusion: ConfusionPair,
}

impl MetricsReport {
    /// Builds the report from the confusion matrix with Negative as reference.
    pub fn from_confusion(approach: Approach, reference_negative: ConfusionMatrix) -> Self {
        let reference_positive = reference_negative.swap();
        let negative = class_metrics(&reference_negative);
        let positive = class_metrics(&reference_positive);
        Self {
            approach,
            negative,
            positive,
            macro_avg: macro_average(&negative, &positive),
            confusion: ConfusionPair {
                reference_negative,
                reference_positive,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?} (expected json or md)")),
        }
    }
}

pub const TABLE_HEADER: &str = "| Approach | Accuracy | Precision | Recall | F1 score |\n|---|---|---|---|---|\n";

pub fn format_metric(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:.3}", round3(v)),
        None => "n/a".to_owned(),
    }
}

/// `| label | acc | prec | rec | f1 |`
pub fn table_row(label: &str, m: &ClassMetrics<f64>) -> String {
    format!(
        "| {label} | {} | {} | {} | {} |",
        format_metric(m.accuracy),
        format_metric(m.precision),
        format_metric(m.recall),
        format_metric(m.f1)
    )
}

/// Three tables (negative reference, positive reference, macro average) with
/// one row per report.
pub fn render_tables(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    let sections: [(&str, fn(&MetricsReport) -> &ClassMetrics<f64>); 3] = [
        ("Negative sentiment as the reference class", |r| &r.negative),
        ("Positive sentiment as the reference class", |r| &r.positive),
        ("Macro average", |r| &r.macro_avg),
    ];
    for (i, (title, pick)) in sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "### {title}\n");
        out.push_str(TABLE_HEADER);
        for r in reports {
            let _ = writeln!(out, "{}", table_row(r.approach.label(), pick(r)));
        }
    }
    out
}

pub fn render_report(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => render_tables(std::slice::from_ref(report)),
    }
}
