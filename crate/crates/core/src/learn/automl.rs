//! Per-entity AutoML: pick a fold count, tune each model kind by Bayesian
//! optimisation of mean fold F1, then refit the incumbent on all rows.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::bayes::{bayes_optimize, BayesConfig, TraceEntry};
use super::cv::{choose_cv_splits, complement, stratified_folds};
use super::model::{derive_seed, fit_rows, Hyperparams, ModelKind, TrainedModel, MODEL_FORMAT_VERSION, N_CLASSES};
use crate::error::{Error, Result};
use crate::evalstat::{confusion, f1_weighted, mcc_multiclass};
use crate::expanse::Dataset;
use crate::simworld::EntityId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutomlConfig {
    pub models: Vec<ModelKind>,
    /// Upper bound on the number of folds.
    pub n_max: usize,
    pub bayes: BayesConfig,
}

impl Default for AutomlConfig {
    fn default() -> Self {
        AutomlConfig {
            models: ModelKind::ALL.to_vec(),
            n_max: 5,
            bayes: BayesConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub f1: f64,
    pub mcc: f64,
    pub fold_f1: Vec<f64>,
    pub fold_mcc: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutcome {
    pub kind: ModelKind,
    pub model: TrainedModel,
    pub cv: CvScore,
    /// Wall-clock seconds for tuning plus the final refit.
    pub duration_s: f64,
    pub trace: Vec<TraceEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntityOutcome {
    pub entity_id: EntityId,
    pub rows: usize,
    pub cv_splits: usize,
    pub models: Vec<ModelOutcome>,
}

impl EntityOutcome {
    pub fn get(&self, kind: ModelKind) -> Option<&ModelOutcome> {
        self.models.iter().find(|m| m.kind == kind)
    }
}

/// Score `hyperparams` on fixed folds: train on each complement, predict
/// the held-out rows, average per-fold weighted F1 and MCC.
pub fn cross_validate(dataset: &Dataset, hyperparams: &Hyperparams, folds: &[Vec<usize>], seed: u64) -> Result<CvScore> {
    let n = dataset.len();
    let mut fold_f1 = Vec::with_capacity(folds.len());
    let mut fold_mcc = Vec::with_capacity(folds.len());
    for (i, test) in folds.iter().enumerate() {
        let train = complement(n, test);
        let tr = dataset.subset(&train);
        let te = dataset.subset(test);
        let fold_seed = derive_seed(seed, i as u64);
        let est = fit_rows(&tr.x, &tr.y, hyperparams, fold_seed)?;
        let pred = est.predict_labels(&te.x, derive_seed(fold_seed, 0xfeed));
        let m = confusion(&te.y, &pred, N_CLASSES)?;
        fold_f1.push(f1_weighted(&m)?);
        fold_mcc.push(mcc_multiclass(&m)?);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    Ok(CvScore { f1: mean(&fold_f1), mcc: mean(&fold_mcc), fold_f1, fold_mcc })
}

pub fn automl_entity(dataset: &Dataset, config: &AutomlConfig, seed: u64) -> Result<EntityOutcome> {
    let splits = choose_cv_splits(&dataset.y, config.n_max)?;
    let folds = stratified_folds(&dataset.y, splits, derive_seed(seed, 1));
    let mut models = Vec::with_capacity(config.models.len());
    for &kind in &config.models {
        let model_seed = derive_seed(seed, 100 + kind as u64);
        let start = Instant::now();
        let space = kind.space();
        let result = bayes_optimize(
            &space,
            |values| {
                kind.hyperparams(values)
                    .and_then(|hp| cross_validate(dataset, &hp, &folds, model_seed))
                    .map_or(f64::NAN, |s| s.f1)
            },
            &config.bayes,
            model_seed,
        )?;
        if !result.best_score.is_finite() {
            return Err(Error::Pipeline(format!("{}: every {kind} evaluation failed", dataset.entity_id)));
        }
        let hyperparams = kind.hyperparams(&result.best_values)?;
        let cv = cross_validate(dataset, &hyperparams, &folds, model_seed)?;
        let estimator = fit_rows(&dataset.x, &dataset.y, &hyperparams, model_seed)?;
        let duration_s = start.elapsed().as_secs_f64();
        let model = TrainedModel {
            version: MODEL_FORMAT_VERSION,
            kind,
            hyperparams,
            cv_splits: splits,
            train_duration_s: duration_s,
            feature_names: dataset.feature_names.clone(),
            seed: model_seed,
            estimator,
        };
        models.push(ModelOutcome { kind, model, cv, duration_s, trace: result.trace });
    }
    Ok(EntityOutcome {
        entity_id: dataset.entity_id.clone(),
        rows: dataset.len(),
        cv_splits: splits,
        models,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Three one-hot places by three one-hot bands; the class is a fixed
    /// function of (place, band) with probability `p`, otherwise uniform.
    pub fn learnable(seed: u64, n: usize, p: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rule = |place: usize, band: usize| if band == 2 { (place + 1) % 3 } else { place };
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut class_counts = [0; 3];
        for _ in 0..n {
            let place = rng.random_range(0..3);
            let band = rng.random_range(0..3);
            let mut row = vec![0.0; 6];
            row[place] = 1.0;
            row[3 + band] = 1.0;
            let c = if rng.random_bool(p) { rule(place, band) } else { rng.random_range(0..3) };
            x.push(row);
            y.push(c);
            class_counts[c] += 1;
        }
        Dataset {
            entity_id: EntityId::from("e001"),
            x,
            y,
            class_counts,
            feature_names: ["p0", "p1", "p2", "morning", "afternoon", "night"].map(String::from).to_vec(),
        }
    }

    fn quick() -> AutomlConfig {
        AutomlConfig {
            models: vec![ModelKind::Dummy, ModelKind::Gbt],
            n_max: 3,
            bayes: BayesConfig { budget: 8, ..BayesConfig::default() },
        }
    }

    #[test]
    fn boosting_beats_the_baseline_on_a_learnable_entity() {
        let ds = learnable(1, 180, 0.85);
        let out = automl_entity(&ds, &quick(), 7).unwrap();
        let gbt = out.get(ModelKind::Gbt).unwrap().cv.f1;
        let dummy = out.get(ModelKind::Dummy).unwrap().cv.f1;
        assert!(gbt >= dummy + 0.15, "gbt {gbt} dummy {dummy}");
        assert_eq!(out.cv_splits, 3);
    }

    #[test]
    fn reruns_pick_the_same_incumbents() {
        let ds = learnable(2, 120, 0.8);
        let a = automl_entity(&ds, &quick(), 3).unwrap();
        let b = automl_entity(&ds, &quick(), 3).unwrap();
        for (x, y) in a.models.iter().zip(&b.models) {
            assert_eq!(x.model.hyperparams, y.model.hyperparams);
            assert_eq!(x.cv, y.cv);
            assert_eq!(x.trace, y.trace);
        }
    }

    #[test]
    fn durations_are_positive() {
        let ds = learnable(3, 90, 0.8);
        let out = automl_entity(&ds, &quick(), 1).unwrap();
        assert!(out.models.iter().all(|m| m.duration_s > 0.0));
    }

    #[test]
    fn singleton_class_is_rejected() {
        let mut ds = learnable(4, 60, 0.8);
        let i = ds.y.iter().position(|&c| c == 2).unwrap();
        for (j, c) in ds.y.iter_mut().enumerate() {
            if *c == 2 && j != i {
                *c = 0;
            }
        }
        assert!(matches!(automl_entity(&ds, &quick(), 0), Err(Error::Contract(_))));
    }
}
