//! Eligibility funnel over every entity in the store, exportable as CSV.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::eligibility::{aggregate_entity, check_eligibility_with, Eligibility, EligibilityRules};
use super::imbalance::ImbalanceMetric;
use super::store::MemoryStore;
use crate::error::Result;
use crate::simworld::EntityId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineRow {
    pub entity_id: EntityId,
    pub counts: [usize; 3],
    pub imbalance_degree: Option<f64>,
    pub has_demographics: bool,
    pub eligibility: Eligibility,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Funnel {
    pub enrolled: usize,
    pub with_demographics: usize,
    pub eligible: usize,
}

pub fn run_pipeline(store: &MemoryStore, rules: &EligibilityRules, metric: &dyn ImbalanceMetric) -> Result<Vec<PipelineRow>> {
    store
        .entities()
        .into_iter()
        .map(|id| {
            let summary = aggregate_entity(store, &id)?;
            Ok(PipelineRow {
                imbalance_degree: metric.degree(&summary.counts).ok(),
                eligibility: check_eligibility_with(&summary, rules, metric),
                counts: summary.counts,
                has_demographics: summary.has_demographics,
                entity_id: id,
            })
        })
        .collect()
}

pub fn funnel(rows: &[PipelineRow]) -> Funnel {
    Funnel {
        enrolled: rows.len(),
        with_demographics: rows.iter().filter(|r| r.has_demographics).count(),
        eligible: rows.iter().filter(|r| r.eligibility.is_eligible()).count(),
    }
}

pub fn write_pipeline_csv<W: Write>(out: W, rows: &[PipelineRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "entity_id",
        "negative",
        "neutral",
        "positive",
        "imbalance_degree",
        "has_demographics",
        "eligible",
        "reason",
    ])?;
    for r in rows {
        let (eligible, reason) = match r.eligibility {
            Eligibility::Eligible => ("true", ""),
            Eligibility::Rejected(why) => ("false", why.as_str()),
        };
        w.write_record([
            r.entity_id.as_str(),
            &r.counts[0].to_string(),
            &r.counts[1].to_string(),
            &r.counts[2].to_string(),
            &r.imbalance_degree.map(|d| format!("{d:.6}")).unwrap_or_default(),
            if r.has_demographics { "true" } else { "false" },
            eligible,
            reason,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_funnel_csv<W: Write>(out: W, f: &Funnel) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stage", "entities"])?;
    w.write_record(["enrolled", &f.enrolled.to_string()])?;
    w.write_record(["with_demographics", &f.with_demographics.to_string()])?;
    w.write_record(["eligible", &f.eligible.to_string()])?;
    w.flush()?;
    Ok(())
}
