//! Scores and statistics for comparing estimators.

mod mannwhitney;
mod metrics;
mod report;

pub use mannwhitney::{mann_whitney_u, midranks, PMethod, StatConfig, UTest, EXACT_MAX};
pub use metrics::{confusion, f1_weighted, mcc_multiclass, per_class, ClassScores, ConfusionMatrix};
pub use report::{report_csv, report_text};

use serde::{Deserialize, Serialize};

/// Scores of one fitted estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub f1_weighted: f64,
    pub mcc: f64,
    pub per_class: Vec<ClassScores>,
    pub duration_s: f64,
}
