//! Entity aggregation and the ordered eligibility filter.

use serde::{Deserialize, Serialize};

use super::imbalance::{ImbalanceMetric, LikelihoodRatio};
use super::store::MemoryStore;
use crate::error::{Error, Result};
use crate::simworld::{EntityId, Valence, SECONDS_PER_DAY};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntitySummary {
    pub entity_id: EntityId,
    /// Reports per class, indexed by [`Valence::index`].
    pub counts: [usize; 3],
    pub span_days: f64,
    pub has_demographics: bool,
}

impl EntitySummary {
    pub fn reports(&self) -> usize {
        self.counts.iter().sum()
    }
}

pub fn aggregate_entity(store: &MemoryStore, id: &EntityId) -> Result<EntitySummary> {
    let log = store
        .export(id)
        .ok_or_else(|| Error::NotFound(format!("entity {id}")))?;
    let mut counts = [0usize; 3];
    for v in log.iter().filter_map(|e| e.valence()) {
        counts[v.index()] += 1;
    }
    let span_days = match (log.first(), log.last()) {
        (Some(a), Some(b)) => (b.t - a.t) / SECONDS_PER_DAY,
        _ => 0.0,
    };
    Ok(EntitySummary {
        entity_id: id.clone(),
        counts,
        span_days,
        has_demographics: store.has_demographics(id).unwrap_or(false),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EligibilityRules {
    pub require_demographics: bool,
    pub min_reports: usize,
    pub min_classes: usize,
    /// Minimum reports for every class that appears at all.
    pub min_per_class: usize,
    pub max_imbalance_degree: f64,
}

impl Default for EligibilityRules {
    fn default() -> Self {
        EligibilityRules {
            require_demographics: true,
            min_reports: 5,
            min_classes: 2,
            min_per_class: 2,
            max_imbalance_degree: 150.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    Demographics,
    MinReports,
    MinClasses,
    MinPerClass,
    Imbalance,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::Demographics => "demographics",
            Rejection::MinReports => "min_reports",
            Rejection::MinClasses => "min_classes",
            Rejection::MinPerClass => "min_per_class",
            Rejection::Imbalance => "imbalance",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Eligibility {
    Eligible,
    Rejected(Rejection),
}

impl Eligibility {
    pub fn is_eligible(self) -> bool {
        self == Eligibility::Eligible
    }
}

pub fn check_eligibility(summary: &EntitySummary, rules: &EligibilityRules) -> Eligibility {
    check_eligibility_with(summary, rules, &LikelihoodRatio)
}

/// Apply the rules in order; the first failing rule is the reason.
pub fn check_eligibility_with(
    summary: &EntitySummary,
    rules: &EligibilityRules,
    metric: &dyn ImbalanceMetric,
) -> Eligibility {
    use Eligibility::Rejected;
    if rules.require_demographics && !summary.has_demographics {
        return Rejected(Rejection::Demographics);
    }
    if summary.reports() < rules.min_reports.max(1) {
        return Rejected(Rejection::MinReports);
    }
    let present: Vec<usize> = summary.counts.iter().copied().filter(|&c| c > 0).collect();
    if present.len() < rules.min_classes {
        return Rejected(Rejection::MinClasses);
    }
    if present.iter().any(|&c| c < rules.min_per_class) {
        return Rejected(Rejection::MinPerClass);
    }
    match metric.degree(&summary.counts) {
        Ok(d) if d <= rules.max_imbalance_degree => Eligibility::Eligible,
        _ => Rejected(Rejection::Imbalance),
    }
}

/// Valence labels in index order, for CSV headers.
pub fn class_names() -> [&'static str; 3] {
    Valence::ALL.map(Valence::as_str)
}
