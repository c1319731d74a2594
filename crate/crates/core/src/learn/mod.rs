//! Location clustering, split search, hyperparameter tuning and the four
//! estimators trained per entity.

pub mod automl;
pub mod bayes;
pub mod cv;
pub mod dummy;
pub mod gbt;
pub mod gp;
pub mod hdbscan;
pub mod logreg;
pub mod mlp;
pub mod model;
pub mod space;
pub mod validity;

pub use automl::{automl_entity, cross_validate, AutomlConfig, CvScore, EntityOutcome, ModelOutcome};
pub use bayes::{bayes_optimize, trace_csv, BayesConfig, BayesResult, Phase, TraceEntry};
pub use cv::{choose_cv_splits, complement, stratified_folds};
pub use gp::GaussianProcess;
pub use hdbscan::{core_distances, density_cluster, ClusterModel, Hierarchy, NOISE};
pub use model::{
    argmax, derive_seed, feature_importance, fit_rows, softmax, train, Estimator, Hyperparams, ModelKind, TrainedModel,
    MODEL_FORMAT_VERSION, N_CLASSES,
};
pub use space::{Dimension, HyperparamSpace};
pub use validity::{
    autodiscover_cluster_params, autodiscover_with, thin, ClusterChoice, ClusterSearch, DensityValidity, ValidityIndex,
};
