//! Discrimination metrics and the cross-validation protocol.

mod cv;
mod metrics;
mod report;

pub use cv::{cross_validate, fit_arm, run_arm, ArmFit, AggregateReport, Arm, CvConfig, FoldReport, MeanStd};
pub use metrics::{auroc, confusion, mean_std, roc_points, Confusion, Scored, DEFAULT_THRESHOLD};
pub use report::{emit_report, report_csv, roc_text, REPORT_COLUMNS, REPORT_FILE, ROC_FILE, UNDEFINED};

#[cfg(test)]
mod tests;
