//! Classification metrics, reports, and the approach runner.

mod experiment;
mod metrics;
mod report;

pub use experiment::{evaluate, predict_all, run_approach, ApproachRun, ExperimentError, Overrides};
pub use metrics::{class_metrics, confusion, macro_average, round3, ClassMetrics, ConfusionMatrix, MetricsError};
pub use report::{format_metric, render_report, render_tables, table_row, ConfusionPair, MetricsReport, ReportFormat, TABLE_HEADER};
