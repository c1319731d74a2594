//! Cloud side: idempotent ingestion, aggregation and eligibility, the
//! upsampling transform, dataset assembly and the scoped prediction service.

mod dataset;
mod eligibility;
mod imbalance;
mod pipeline;
mod server;
mod store;
mod transform;

pub use dataset::{
    build_dataset, build_dataset_from_events, located_points, Dataset, DatasetOptions, FeatureEncoder,
};
pub use eligibility::{
    aggregate_entity, check_eligibility, check_eligibility_with, class_names, Eligibility,
    EligibilityRules, EntitySummary, Rejection,
};
pub use imbalance::{imbalance_degree, ImbalanceMetric, LikelihoodRatio};
pub use pipeline::{funnel, run_pipeline, write_funnel_csv, write_pipeline_csv, Funnel, PipelineRow};
pub use server::{handle_prediction, request_prediction, CloudServer, ModelRegistry, Predictor};
pub use store::MemoryStore;
pub use transform::{transform_upsample, GridSeries};
