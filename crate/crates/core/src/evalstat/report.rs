//! Printable classification reports.

use std::fmt::Write as _;
use std::io::Write;

use super::metrics::{f1_weighted, mcc_multiclass, per_class, ConfusionMatrix};
use crate::error::Result;

/// Aligned text table: one row per class, then weighted F1 and MCC.
pub fn report_text(m: &ConfusionMatrix, class_names: &[&str]) -> Result<String> {
    let scores = per_class(m);
    let width = class_names.iter().map(|s| s.len()).max().unwrap_or(5).max(8);
    let mut out = String::new();
    writeln!(out, "{:>width$} {:>9} {:>9} {:>9} {:>9}", "", "precision", "recall", "f1", "support").ok();
    for (name, s) in class_names.iter().zip(&scores) {
        writeln!(
            out,
            "{:>width$} {:>9.3} {:>9.3} {:>9.3} {:>9}",
            name, s.precision, s.recall, s.f1, s.support
        )
        .ok();
    }
    writeln!(out).ok();
    writeln!(out, "{:>width$} {:>9.3} {:>29}", "weighted", f1_weighted(m)?, m.total()).ok();
    writeln!(out, "{:>width$} {:>9.3}", "mcc", mcc_multiclass(m)?).ok();
    Ok(out)
}

pub fn report_csv<W: Write>(out: W, m: &ConfusionMatrix, class_names: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class", "precision", "recall", "f1", "support"])?;
    for (name, s) in class_names.iter().zip(per_class(m)) {
        w.write_record([
            name.to_string(),
            format!("{:.6}", s.precision),
            format!("{:.6}", s.recall),
            format!("{:.6}", s.f1),
            s.support.to_string(),
        ])?;
    }
    w.write_record([
        "weighted".to_string(),
        String::new(),
        String::new(),
        format!("{:.6}", f1_weighted(m)?),
        m.total().to_string(),
    ])?;
    w.flush()?;
    Ok(())
}
