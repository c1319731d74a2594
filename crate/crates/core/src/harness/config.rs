use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::error::{Error, Result};
use crate::evalstat::StatConfig;
use crate::expanse::{DatasetOptions, EligibilityRules};
use crate::learn::{derive_seed, AutomlConfig, ClusterSearch, ModelKind};
use crate::simworld::{Cohort, CohortSpec, EntityId, FaultMix, FaultPlan};

/// How the F1 and MCC samples of the U test are formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UTestGrouping {
    /// One mean score per entity; the two samples are the per-entity vectors.
    #[default]
    Pooled,
    /// One test per entity over its fold scores.
    PerEntity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsOptions {
    pub alpha: f64,
    /// Estimator whose scores feed the U test.
    pub estimator: ModelKind,
    pub grouping: UTestGrouping,
}

impl Default for StatsOptions {
    fn default() -> Self {
        StatsOptions {
            alpha: StatConfig::default().alpha,
            estimator: ModelKind::Dummy,
            grouping: UTestGrouping::Pooled,
        }
    }
}

impl StatsOptions {
    pub fn stat_config(&self) -> StatConfig {
        StatConfig { alpha: self.alpha }
    }
}

/// Which scores the evaluation and report emit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    F1,
    Mcc,
    #[default]
    Both,
}

impl Metric {
    pub fn f1(self) -> bool {
        matches!(self, Metric::F1 | Metric::Both)
    }

    pub fn mcc(self) -> bool {
        matches!(self, Metric::Mcc | Metric::Both)
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(Metric::F1),
            "mcc" => Ok(Metric::Mcc),
            "both" => Ok(Metric::Both),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

/// Everything one experiment run depends on. Relative paths are taken
/// relative to the directory of the file the config was loaded from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Cohort spec file; the built-in defaults when absent.
    pub cohort: Option<PathBuf>,
    /// Scripted fault plan; generated from `faults` when absent.
    pub fault_plan: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Simulated seconds per world step.
    pub step_s: f64,
    /// Worker threads for per-entity learning; 0 picks one per core.
    pub threads: usize,
    pub metric: Metric,
    pub faults: FaultMix,
    pub agent: AgentConfig,
    pub rules: EligibilityRules,
    pub dataset: DatasetOptions,
    pub clustering: ClusterSearch,
    pub automl: AutomlConfig,
    pub stats: StatsOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            cohort: None,
            fault_plan: None,
            out_dir: PathBuf::from("out"),
            step_s: 3600.0,
            threads: 0,
            metric: Metric::Both,
            faults: FaultMix::default(),
            agent: AgentConfig::default(),
            rules: EligibilityRules::default(),
            dataset: DatasetOptions::default(),
            clustering: ClusterSearch::default(),
            automl: AutomlConfig::default(),
            stats: StatsOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.cohort.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.fault_plan.as_mut() {
            rebase(p);
        }
        rebase(&mut cfg.out_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for path in [&self.cohort, &self.fault_plan].into_iter().flatten() {
            if !path.is_file() {
                return Err(Error::Config(format!("{} does not exist", path.display())));
            }
        }
        if !(self.step_s > 0.0) {
            return Err(Error::Config(format!("step_s must be > 0, got {}", self.step_s)));
        }
        if self.automl.models.is_empty() {
            return Err(Error::Config("no model kinds selected".into()));
        }
        if self.automl.n_max < 2 {
            return Err(Error::Config("automl.n_max must be at least 2".into()));
        }
        if self.automl.bayes.budget < self.automl.bayes.initial_design {
            return Err(Error::Config("bayes budget is smaller than the initial design".into()));
        }
        self.stats.stat_config().validate()
    }

    pub fn cohort_spec(&self) -> Result<CohortSpec> {
        match &self.cohort {
            Some(path) => CohortSpec::load(path),
            None => Ok(CohortSpec::default()),
        }
    }

    pub fn build_cohort(&self) -> Result<Cohort> {
        crate::simworld::build_cohort(&self.cohort_spec()?, self.seed)
    }

    pub fn fault_plan(&self, cohort: &Cohort) -> Result<FaultPlan> {
        match &self.fault_plan {
            Some(path) => FaultPlan::load(path),
            None => {
                let ids: Vec<EntityId> = cohort.profiles.iter().map(|p| p.entity_id.clone()).collect();
                Ok(FaultPlan::generate(
                    &ids,
                    cohort.spec.horizon_s(),
                    &self.faults,
                    derive_seed(self.seed, 2),
                ))
            }
        }
    }
}
