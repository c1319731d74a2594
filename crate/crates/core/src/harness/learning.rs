use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::expanse::{
    build_dataset_from_events, located_points, Dataset, FeatureEncoder, MemoryStore, PipelineRow, Predictor,
};
use crate::learn::{
    autodiscover_with, automl_entity, derive_seed, ClusterModel, DensityValidity, EntityOutcome, ModelKind,
};
use crate::simworld::{Cohort, EntityId};

/// The location clustering chosen for one entity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub points: usize,
    /// `None` when no parameters produced a partition with positive validity.
    pub min_cluster_size: Option<usize>,
    pub min_samples: Option<usize>,
    pub n_clusters: usize,
    pub validity: Option<f64>,
}

pub struct EntityLearning {
    pub entity_id: EntityId,
    pub clusters: ClusterSummary,
    pub cluster_model: ClusterModel,
    pub encoder: FeatureEncoder,
    pub dataset: Dataset,
    pub outcome: EntityOutcome,
}

impl EntityLearning {
    /// Predictor built from the model with the best CV F1; earlier kinds win ties.
    pub fn best_predictor(&self) -> Option<Predictor> {
        let best = self
            .outcome
            .models
            .iter()
            .reduce(|a, b| if b.cv.f1 > a.cv.f1 { b } else { a })?;
        Some(Predictor {
            clusters: self.cluster_model.clone(),
            encoder: self.encoder.clone(),
            model: best.model.clone(),
        })
    }

    pub fn predictor(&self, kind: ModelKind) -> Option<Predictor> {
        self.outcome.get(kind).map(|m| Predictor {
            clusters: self.cluster_model.clone(),
            encoder: self.encoder.clone(),
            model: m.model.clone(),
        })
    }
}

/// Cluster an entity's positions, assemble its table and tune every model.
pub fn learn_entity(
    store: &MemoryStore,
    entity_id: &EntityId,
    start_weekday: u32,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<EntityLearning> {
    let events = store
        .export(entity_id)
        .ok_or_else(|| Error::NotFound(format!("entity {entity_id}")))?;
    let points = located_points(&events);
    let (cluster_model, clusters) = match autodiscover_with(&points, &config.clustering, &DensityValidity) {
        Ok(choice) => {
            let summary = ClusterSummary {
                points: points.len(),
                min_cluster_size: Some(choice.min_cluster_size),
                min_samples: Some(choice.min_samples),
                n_clusters: choice.model.n_clusters,
                validity: Some(choice.validity),
            };
            (choice.model, summary)
        }
        Err(Error::NoStructure) => {
            debug!("{entity_id}: no location structure, every position is noise");
            let summary = ClusterSummary {
                points: points.len(),
                min_cluster_size: None,
                min_samples: None,
                n_clusters: 0,
                validity: None,
            };
            (ClusterModel::from_exemplars(Vec::new(), Vec::new(), Vec::new()), summary)
        }
        Err(e) => return Err(e),
    };
    let encoder = FeatureEncoder {
        n_clusters: cluster_model.n_clusters,
        start_weekday,
    };
    let dataset = build_dataset_from_events(entity_id, &events, &cluster_model, &encoder, &config.dataset)?;
    let outcome = automl_entity(&dataset, &config.automl, seed)?;
    Ok(EntityLearning {
        entity_id: entity_id.clone(),
        clusters,
        cluster_model,
        encoder,
        dataset,
        outcome,
    })
}

/// Learn every eligible entity of `rows`, fanning out over a worker pool.
/// Results keep the order of `rows`.
pub fn learn_eligible(
    store: &MemoryStore,
    rows: &[PipelineRow],
    cohort: &Cohort,
    config: &ExperimentConfig,
) -> Result<Vec<EntityLearning>> {
    let eligible: Vec<(usize, &EntityId)> = rows
        .iter()
        .filter(|r| r.eligibility.is_eligible())
        .map(|r| {
            let idx = cohort
                .index_of(&r.entity_id)
                .ok_or_else(|| Error::NotFound(format!("{} is not in the cohort", r.entity_id)))?;
            Ok((idx, &r.entity_id))
        })
        .collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<EntityLearning>> = pool.install(|| {
        eligible
            .par_iter()
            .map(|&(idx, id)| {
                let seed = derive_seed(config.seed, 1000 + idx as u64);
                let learned = learn_entity(store, id, cohort.start_weekday, config, seed);
                if let Ok(l) = &learned {
                    info!("{id}: {} rows, {} clusters, {} folds", l.dataset.len(), l.clusters.n_clusters, l.outcome.cv_splits);
                }
                learned
            })
            .collect()
    });
    results.into_iter().collect()
}
