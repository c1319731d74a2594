use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{Metric, StatsOptions, UTestGrouping};
use super::learning::EntityLearning;
use crate::error::{Error, Result};
use crate::evalstat::{mann_whitney_u, UTest};
use crate::expanse::Funnel;
use crate::learn::ModelKind;
use crate::simworld::EntityId;

/// Cross-validated scores of one model on one entity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub entity_id: EntityId,
    pub model: ModelKind,
    pub rows: usize,
    pub cv_splits: usize,
    pub f1: f64,
    pub mcc: f64,
    pub fold_f1: Vec<f64>,
    pub fold_mcc: Vec<f64>,
    pub hyperparams: String,
    pub duration_s: f64,
}

pub fn collect_scores(learned: &[EntityLearning]) -> Vec<ModelScore> {
    learned
        .iter()
        .flat_map(|l| {
            l.outcome.models.iter().map(|m| ModelScore {
                entity_id: l.entity_id.clone(),
                model: m.kind,
                rows: l.outcome.rows,
                cv_splits: l.outcome.cv_splits,
                f1: m.cv.f1,
                mcc: m.cv.mcc,
                fold_f1: m.cv.fold_f1.clone(),
                fold_mcc: m.cv.fold_mcc.clone(),
                hyperparams: m.model.hyperparams.describe(),
                duration_s: m.duration_s,
            })
        })
        .collect()
}

/// Kinds present in `scores`, in first-seen order.
pub fn model_kinds(scores: &[ModelScore]) -> Vec<ModelKind> {
    let mut kinds = Vec::new();
    for s in scores {
        if !kinds.contains(&s.model) {
            kinds.push(s.model);
        }
    }
    kinds
}

pub fn write_models_csv<W: Write>(out: W, scores: &[ModelScore]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["entity_id", "model", "rows", "cv_splits", "f1", "mcc", "hyperparams"])?;
    for s in scores {
        w.write_record([
            s.entity_id.to_string(),
            s.model.to_string(),
            s.rows.to_string(),
            s.cv_splits.to_string(),
            format!("{:.6}", s.f1),
            format!("{:.6}", s.mcc),
            s.hyperparams.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Wall-clock times vary between runs, so they live apart from the scores.
pub fn write_durations_csv<W: Write>(out: W, scores: &[ModelScore]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["entity_id", "model", "duration_s"])?;
    for s in scores {
        w.write_record([s.entity_id.to_string(), s.model.to_string(), format!("{:.4}", s.duration_s)])?;
    }
    w.flush()?;
    Ok(())
}

/// Five-number summary plus the mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Quantile of sorted data by linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(BoxStats {
        n: v.len(),
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
    })
}

/// One row of quartiles per model for the chosen score.
pub fn write_boxplot_csv<W: Write>(out: W, scores: &[ModelScore], score: fn(&ModelScore) -> f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "n", "min", "q1", "median", "q3", "max", "mean"])?;
    for kind in model_kinds(scores) {
        let values: Vec<f64> = scores.iter().filter(|s| s.model == kind).map(score).collect();
        let Some(b) = box_stats(&values) else { continue };
        let mut rec = vec![kind.to_string(), b.n.to_string()];
        rec.extend([b.min, b.q1, b.median, b.q3, b.max, b.mean].map(|x| format!("{x:.6}")));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSummary {
    pub model: ModelKind,
    pub entities: usize,
    pub mean_f1: f64,
    pub mean_mcc: f64,
    pub total_duration_s: f64,
}

pub fn summarize(scores: &[ModelScore]) -> Vec<ModelSummary> {
    model_kinds(scores)
        .into_iter()
        .map(|kind| {
            let rows: Vec<&ModelScore> = scores.iter().filter(|s| s.model == kind).collect();
            let n = rows.len() as f64;
            ModelSummary {
                model: kind,
                entities: rows.len(),
                mean_f1: rows.iter().map(|s| s.f1).sum::<f64>() / n,
                mean_mcc: rows.iter().map(|s| s.mcc).sum::<f64>() / n,
                total_duration_s: rows.iter().map(|s| s.duration_s).sum(),
            }
        })
        .collect()
}

/// Scientific notation with a signed two-digit exponent, e.g. `2.237e-02`.
pub fn format_p(p: f64) -> String {
    if p == 0.0 {
        return "0.000e+00".into();
    }
    let s = format!("{p:.3e}");
    let (mantissa, exp) = s.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn verdict(test: &UTest, alpha: f64) -> &'static str {
    if test.rejects(alpha) {
        "Different distribution (reject H0)"
    } else {
        "Same distribution (fail to reject H0)"
    }
}

/// Outcome of the F1 versus MCC comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreComparison {
    pub estimator: ModelKind,
    pub grouping: UTestGrouping,
    /// One test when pooled; one per entity otherwise.
    pub tests: Vec<(Option<EntityId>, UTest)>,
}

pub fn compare_f1_mcc(scores: &[ModelScore], options: &StatsOptions) -> Result<ScoreComparison> {
    let picked: Vec<&ModelScore> = scores.iter().filter(|s| s.model == options.estimator).collect();
    if picked.is_empty() {
        return Err(Error::Pipeline(format!("no scores for {}", options.estimator)));
    }
    let tests = match options.grouping {
        UTestGrouping::Pooled => {
            let f1: Vec<f64> = picked.iter().map(|s| s.f1).collect();
            let mcc: Vec<f64> = picked.iter().map(|s| s.mcc).collect();
            vec![(None, mann_whitney_u(&f1, &mcc)?)]
        }
        UTestGrouping::PerEntity => picked
            .iter()
            .map(|s| Ok((Some(s.entity_id.clone()), mann_whitney_u(&s.fold_f1, &s.fold_mcc)?)))
            .collect::<Result<_>>()?,
    };
    Ok(ScoreComparison {
        estimator: options.estimator,
        grouping: options.grouping,
        tests,
    })
}

pub fn stats_markdown(cmp: &ScoreComparison, alpha: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# F1 vs. MCC\n");
    let grouping = match cmp.grouping {
        UTestGrouping::Pooled => "one mean score per entity, pooled",
        UTestGrouping::PerEntity => "fold scores, one test per entity",
    };
    let _ = writeln!(s, "Mann-Whitney U test on {} scores ({grouping}).\n", cmp.estimator);
    let _ = writeln!(s, "| Comparison | U | p-value | Meaning (alpha={alpha}) |");
    let _ = writeln!(s, "|---|---|---|---|");
    for (entity, test) in &cmp.tests {
        let label = match entity {
            Some(id) => format!("F1 vs. MCC ({id})"),
            None => "F1 vs. MCC".to_string(),
        };
        let _ = writeln!(s, "| {label} | {:.1} | {} | {} |", test.u, format_p(test.p), verdict(test, alpha));
    }
    if cmp.tests.len() > 1 {
        let rejected = cmp.tests.iter().filter(|(_, t)| t.rejects(alpha)).count();
        let _ = writeln!(s, "\n{rejected} of {} tests reject H0.", cmp.tests.len());
    }
    s
}

pub fn summary_markdown(summaries: &[ModelSummary], funnel: &Funnel, metric: Metric) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Model scores\n");
    let _ = writeln!(
        s,
        "Entities: {} enrolled, {} with demographics, {} eligible.\n",
        funnel.enrolled, funnel.with_demographics, funnel.eligible
    );
    let mut header = vec!["Model"];
    if metric.f1() {
        header.push("Mean F1");
    }
    if metric.mcc() {
        header.push("Mean MCC");
    }
    header.push("Total duration (s)");
    let _ = writeln!(s, "| {} |", header.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(header.len()));
    for m in summaries {
        let mut row = vec![m.model.to_string()];
        if metric.f1() {
            row.push(format!("{:.3}", m.mean_f1));
        }
        if metric.mcc() {
            row.push(format!("{:.3}", m.mean_mcc));
        }
        row.push(format!("{:.2}", m.total_duration_s));
        let _ = writeln!(s, "| {} |", row.join(" | "));
    }
    let _ = writeln!(
        s,
        "\nDurations are wall-clock time for tuning and refitting on this machine and are not comparable across hardware."
    );
    s
}
