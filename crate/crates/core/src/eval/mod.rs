//! Metrics, reports and the cross-validation harness.

pub mod cv;
pub mod metrics;
pub mod report;

pub use cv::{cross_validate, CvOptions, CvResult};
pub use report::{evaluate_predictions, markdown_tables, summarize, write_csv, EvalReport, MeanStd};
