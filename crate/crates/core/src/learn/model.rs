//! Model kinds, their search spaces, and the fitted-model container.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dummy::DummyModel;
use super::gbt::{GbtModel, GbtParams};
use super::logreg::{LogRegModel, LogRegParams};
use super::mlp::{MlpModel, MlpParams};
use super::space::{Dimension, HyperparamSpace};
use crate::error::{Error, Result};
use crate::expanse::Dataset;

pub const N_CLASSES: usize = 3;

/// Bumped whenever the serialised layout changes.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// In-place softmax, shifted by the max for stability.
pub fn softmax(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// SplitMix64 step, used to derive independent seeds.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dummy,
    Logreg,
    Gbt,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Dummy, ModelKind::Logreg, ModelKind::Gbt, ModelKind::Mlp];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dummy => "dummy",
            ModelKind::Logreg => "logreg",
            ModelKind::Gbt => "gbt",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn space(self) -> HyperparamSpace {
        let dims = match self {
            ModelKind::Dummy => vec![],
            ModelKind::Logreg => vec![Dimension::log("l2", 1e-4, 1e2)],
            ModelKind::Gbt => vec![
                Dimension::int("rounds", 10, 200),
                Dimension::int("max_depth", 1, 6),
                Dimension::real("learning_rate", 0.01, 0.5),
                Dimension::real("subsample", 0.5, 1.0),
                Dimension::real("lambda", 0.0, 10.0),
            ],
            ModelKind::Mlp => vec![
                Dimension::int("hidden", 4, 64),
                Dimension::log("learning_rate", 1e-4, 1e-1),
                Dimension::int("epochs", 10, 200),
            ],
        };
        HyperparamSpace { dims }
    }

    /// Hyperparameters from decoded values in [`ModelKind::space`] order.
    pub fn hyperparams(self, values: &[f64]) -> Result<Hyperparams> {
        let want = self.space().len();
        if values.len() != want {
            return Err(Error::Contract(format!("{self}: expected {want} values, got {}", values.len())));
        }
        Ok(match self {
            ModelKind::Dummy => Hyperparams::Dummy,
            ModelKind::Logreg => Hyperparams::Logreg(LogRegParams { l2: values[0], ..LogRegParams::default() }),
            ModelKind::Gbt => Hyperparams::Gbt(GbtParams {
                rounds: values[0] as usize,
                max_depth: values[1] as usize,
                learning_rate: values[2],
                subsample: values[3],
                lambda: values[4],
                ..GbtParams::default()
            }),
            ModelKind::Mlp => Hyperparams::Mlp(MlpParams {
                hidden: values[0] as usize,
                learning_rate: values[1],
                epochs: values[2] as usize,
                ..MlpParams::default()
            }),
        })
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hyperparams {
    Dummy,
    Logreg(LogRegParams),
    Gbt(GbtParams),
    Mlp(MlpParams),
}

impl Hyperparams {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparams::Dummy => ModelKind::Dummy,
            Hyperparams::Logreg(_) => ModelKind::Logreg,
            Hyperparams::Gbt(_) => ModelKind::Gbt,
            Hyperparams::Mlp(_) => ModelKind::Mlp,
        }
    }

    /// `name=value` pairs for reports.
    pub fn describe(&self) -> String {
        match self {
            Hyperparams::Dummy => "strategy=stratified".into(),
            Hyperparams::Logreg(p) => format!("l2={:.4e}", p.l2),
            Hyperparams::Gbt(p) => format!(
                "rounds={} max_depth={} learning_rate={:.4} subsample={:.3} lambda={:.3}",
                p.rounds, p.max_depth, p.learning_rate, p.subsample, p.lambda
            ),
            Hyperparams::Mlp(p) => format!("hidden={} learning_rate={:.4e} epochs={}", p.hidden, p.learning_rate, p.epochs),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "lowercase")]
pub enum Estimator {
    Dummy(DummyModel),
    Logreg(LogRegModel),
    Gbt(GbtModel),
    Mlp(MlpModel),
}

/// A fitted estimator with the settings that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub kind: ModelKind,
    pub hyperparams: Hyperparams,
    /// Folds used while tuning; 0 when trained directly.
    pub cv_splits: usize,
    pub train_duration_s: f64,
    pub feature_names: Vec<String>,
    pub seed: u64,
    pub estimator: Estimator,
}

/// Fit one estimator on raw rows.
pub fn fit_rows(x: &[Vec<f64>], y: &[usize], hyperparams: &Hyperparams, seed: u64) -> Result<Estimator> {
    if y.is_empty() || x.len() != y.len() {
        return Err(Error::Contract("training needs matching, non-empty rows".into()));
    }
    if let Some(&c) = y.iter().find(|&&c| c >= N_CLASSES) {
        return Err(Error::Contract(format!("label {c} out of range")));
    }
    if y.iter().all(|&c| c == y[0]) {
        return Err(Error::Contract("single-class training data".into()));
    }
    Ok(match hyperparams {
        Hyperparams::Dummy => Estimator::Dummy(DummyModel::fit(y)),
        Hyperparams::Logreg(p) => Estimator::Logreg(LogRegModel::fit(x, y, p)),
        Hyperparams::Gbt(p) => Estimator::Gbt(GbtModel::fit(x, y, p, seed)),
        Hyperparams::Mlp(p) => Estimator::Mlp(MlpModel::fit(x, y, p, seed)),
    })
}

pub fn train(kind: ModelKind, dataset: &Dataset, hyperparams: &Hyperparams, seed: u64) -> Result<TrainedModel> {
    if hyperparams.kind() != kind {
        return Err(Error::Contract(format!("{} hyperparameters for a {kind} model", hyperparams.kind())));
    }
    let start = std::time::Instant::now();
    let estimator = fit_rows(&dataset.x, &dataset.y, hyperparams, seed)?;
    Ok(TrainedModel {
        version: MODEL_FORMAT_VERSION,
        kind,
        hyperparams: hyperparams.clone(),
        cv_splits: 0,
        train_duration_s: start.elapsed().as_secs_f64(),
        feature_names: dataset.feature_names.clone(),
        seed,
        estimator,
    })
}

impl Estimator {
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Estimator::Dummy(m) => m.predict_proba(),
            Estimator::Logreg(m) => m.predict_proba(x),
            Estimator::Gbt(m) => m.predict_proba(x),
            Estimator::Mlp(m) => m.predict_proba(x),
        }
    }

    /// Class per row. The baseline draws from its priors with a generator
    /// seeded by `seed`; the others take the most probable class.
    pub fn predict_labels(&self, xs: &[Vec<f64>], seed: u64) -> Vec<usize> {
        match self {
            Estimator::Dummy(m) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                xs.iter().map(|_| m.sample(&mut rng)).collect()
            }
            other => xs.iter().map(|x| argmax(&other.predict_proba(x))).collect(),
        }
    }
}

impl TrainedModel {
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        self.estimator.predict_proba(x)
    }

    pub fn predict_labels(&self, xs: &[Vec<f64>], seed: u64) -> Vec<usize> {
        self.estimator.predict_labels(xs, seed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            version: u32,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.version != MODEL_FORMAT_VERSION {
            return Err(Error::Unsupported(format!(
                "model format version {} (expected {MODEL_FORMAT_VERSION})",
                probe.version
            )));
        }
        Ok(serde_json::from_str(text)?)
    }
}

/// Gain share per named feature, summing to one. A boosted model without
/// any split yields an empty map.
pub fn feature_importance(model: &TrainedModel) -> Result<BTreeMap<String, f64>> {
    let Estimator::Gbt(gbt) = &model.estimator else {
        return Err(Error::Unsupported(format!("feature importance for {}", model.kind)));
    };
    Ok(gbt
        .importance()
        .into_iter()
        .map(|(f, share)| {
            let name = model.feature_names.get(f).cloned().unwrap_or_else(|| format!("f{f}"));
            (name, share)
        })
        .collect())
}
