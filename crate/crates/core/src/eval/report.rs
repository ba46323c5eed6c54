use std::fmt::Write as _;
use std::path::Path;

use super::cv::{AggregateReport, Arm};
use super::metrics::roc_points;
use crate::error::{Error, Result};

pub const REPORT_FILE: &str = "report.csv";
pub const ROC_FILE: &str = "roc.txt";

/// Column order of `report.csv`. The `*_mean`/`*_std` columns are filled on
/// the aggregate row only.
pub const REPORT_COLUMNS: [&str; 16] = [
    "arm",
    "fold_id",
    "n",
    "tp",
    "tn",
    "fp",
    "fn",
    "auroc",
    "sensitivity",
    "specificity",
    "auroc_mean",
    "auroc_std",
    "sensitivity_mean",
    "sensitivity_std",
    "specificity_mean",
    "specificity_std",
];

/// Marker for a metric without a defined value (for example, no positives).
pub const UNDEFINED: &str = "NA";

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_owned(), |x| format!("{x:.6}"))
}

pub fn report_csv(reports: &[(Arm, AggregateReport)], comment: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(c) = comment {
        let _ = writeln!(s, "# {c}");
    }
    let _ = writeln!(s, "{}", REPORT_COLUMNS.join(","));
    for (arm, r) in reports {
        for f in &r.folds {
            let c = f.counts;
            let _ = writeln!(
                s,
                "{arm},{},{},{},{},{},{},{},{},{},,,,,,",
                f.fold_id,
                c.total(),
                c.tp,
                c.tn,
                c.fp,
                c.fn_,
                num(f.auroc),
                num(f.sensitivity),
                num(f.specificity)
            );
        }
        let c = r.counts;
        let _ = writeln!(
            s,
            "{arm},ALL,{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.total(),
            c.tp,
            c.tn,
            c.fp,
            c.fn_,
            num(Some(r.auroc)),
            num(r.sensitivity),
            num(r.specificity),
            num(r.fold_auroc.mean),
            num(r.fold_auroc.std),
            num(r.fold_sensitivity.mean),
            num(r.fold_sensitivity.std),
            num(r.fold_specificity.mean),
            num(r.fold_specificity.std)
        );
    }
    s
}

/// Pooled ROC points per arm: a `[arm]` line followed by `fpr tpr` lines.
pub fn roc_text(reports: &[(Arm, AggregateReport)], comment: Option<&str>) -> Result<String> {
    let mut s = String::new();
    if let Some(c) = comment {
        let _ = writeln!(s, "# {c}");
    }
    for (arm, r) in reports {
        let _ = writeln!(s, "[{arm}]");
        for (fpr, tpr) in roc_points(&r.pooled_scores())? {
            let _ = writeln!(s, "{fpr:.6} {tpr:.6}");
        }
    }
    Ok(s)
}

/// Writes `report.csv` and `roc.txt` into `dir`.
pub fn emit_report(reports: &[(Arm, AggregateReport)], dir: &Path, comment: Option<&str>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(REPORT_FILE);
    std::fs::write(&path, report_csv(reports, comment)).map_err(|e| Error::io(&path, e))?;
    let path = dir.join(ROC_FILE);
    std::fs::write(&path, roc_text(reports, comment)?).map_err(|e| Error::io(&path, e))?;
    Ok(())
}
