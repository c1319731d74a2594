//! The experiment driver: simulate, sync, filter, learn, evaluate and report,
//! either in one go or stage by stage through files in the output directory.

mod config;
mod learning;
mod report;
mod simulate;

pub use config::{ExperimentConfig, Metric, StatsOptions, UTestGrouping};
pub use learning::{learn_eligible, learn_entity, ClusterSummary, EntityLearning};
pub use report::{
    box_stats, collect_scores, compare_f1_mcc, format_p, model_kinds, stats_markdown, summarize, summary_markdown,
    write_boxplot_csv, write_durations_csv, write_models_csv, BoxStats, ModelScore, ModelSummary, ScoreComparison,
};
pub use simulate::{simulate, AgentReport, DeliveryAudit, Simulation};

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::expanse::{
    funnel, run_pipeline, write_funnel_csv, write_pipeline_csv, Funnel, LikelihoodRatio, MemoryStore, PipelineRow,
    Predictor,
};
use crate::learn::{feature_importance, trace_csv, ModelKind};
use crate::simworld::{read_events, write_events, Cohort, EntityId};

pub const EVENTS_FILE: &str = "events.jsonl";
pub const SCORES_FILE: &str = "scores.json";
pub const FAILED_FILE: &str = "FAILED";
pub const PREDICTORS_DIR: &str = "predictors";

/// What a full run left on disk.
#[derive(Debug)]
pub struct ReportBundle {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub funnel: Funnel,
    pub summaries: Vec<ModelSummary>,
    pub comparison: ScoreComparison,
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = File::create(&path)?;
        self.written.push(path);
        Ok(BufWriter::new(file))
    }

    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        let mut w = self.create(name)?;
        w.write_all(content.as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

/// Run `body`; if it fails, leave a marker naming the stage and the error so
/// that partial outputs are not mistaken for a finished run.
pub fn flagged<T>(out_dir: &Path, stage: &str, body: impl FnOnce() -> Result<T>) -> Result<T> {
    let marker = out_dir.join(FAILED_FILE);
    if marker.exists() {
        fs::remove_file(&marker)?;
    }
    body().inspect_err(|e| {
        if fs::create_dir_all(out_dir).is_ok() {
            let _ = fs::write(&marker, format!("stage: {stage}\nerror: {e}\n"));
        }
    })
}

/// Simulate the cohort and write the server-side logs plus the robustness table.
pub fn stage_simulate(config: &ExperimentConfig) -> Result<Simulation> {
    let cohort = config.build_cohort()?;
    let plan = config.fault_plan(&cohort)?;
    let sim = simulate(cohort, plan, &config.agent, config.step_s, config.seed)?;
    let mut out = Outputs::new(&config.out_dir)?;
    write_store(&mut out, &sim.server.store, &sim.cohort)?;
    write_robustness(&mut out, &sim)?;
    Ok(sim)
}

fn write_store(out: &mut Outputs, store: &MemoryStore, cohort: &Cohort) -> Result<()> {
    let mut w = out.create(EVENTS_FILE)?;
    for p in &cohort.profiles {
        let events = store.export(&p.entity_id).unwrap_or_default();
        write_events(&mut w, &events)?;
    }
    w.flush()?;
    Ok(())
}

fn write_robustness(out: &mut Outputs, sim: &Simulation) -> Result<()> {
    let mut w = csv::Writer::from_writer(out.create("robustness.csv")?);
    w.write_record([
        "entity_id",
        "crashes",
        "max_recovery_s",
        "lost_while_crashed",
        "committed",
        "stored",
        "missing",
        "unexpected",
        "duplicated",
        "active_fraction",
        "battery_drain_per_day",
    ])?;
    let horizon = sim.cohort.spec.horizon_s();
    for a in &sim.agents {
        w.write_record([
            a.entity_id.to_string(),
            a.recoveries.len().to_string(),
            a.max_recovery_s().map_or(String::new(), |d| format!("{d:.1}")),
            a.counters.lost_while_crashed.to_string(),
            a.audit.committed.to_string(),
            a.audit.stored.to_string(),
            a.audit.missing.to_string(),
            a.audit.unexpected.to_string(),
            a.audit.duplicated.to_string(),
            format!("{:.4}", a.counters.active_seconds / horizon),
            format!("{:.5}", a.battery_drain * 86_400.0 / horizon),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rebuild the server store from the logs a previous simulate stage wrote.
pub fn load_store(config: &ExperimentConfig, cohort: &Cohort) -> Result<MemoryStore> {
    let path = config.out_dir.join(EVENTS_FILE);
    let file = File::open(&path).map_err(|e| Error::Pipeline(format!("{}: {e}; run simulate first", path.display())))?;
    let events = read_events(BufReader::new(file))?;
    let store = MemoryStore::new();
    for p in &cohort.profiles {
        store.register(&p.entity_id, p.has_demographics());
    }
    let mut by_entity: std::collections::BTreeMap<EntityId, Vec<_>> = std::collections::BTreeMap::new();
    for e in events {
        if cohort.get(&e.entity_id).is_none() {
            return Err(Error::Pipeline(format!("log names unknown entity {}", e.entity_id)));
        }
        by_entity.entry(e.entity_id.clone()).or_default().push(e);
    }
    for (id, events) in by_entity {
        store.restore(&id, events)?;
    }
    Ok(store)
}

/// Aggregate, filter and write the per-entity table and the funnel.
pub fn stage_pipeline(config: &ExperimentConfig, store: &MemoryStore) -> Result<(Vec<PipelineRow>, Funnel)> {
    let rows = run_pipeline(store, &config.rules, &LikelihoodRatio)?;
    let f = funnel(&rows);
    let mut out = Outputs::new(&config.out_dir)?;
    write_pipeline_csv(out.create("pipeline.csv")?, &rows)?;
    write_funnel_csv(out.create("funnel.csv")?, &f)?;
    Ok((rows, f))
}

/// Learn every eligible entity and write scores, clusterings, traces,
/// importances and the published predictors.
pub fn stage_learn(
    config: &ExperimentConfig,
    store: &MemoryStore,
    rows: &[PipelineRow],
    cohort: &Cohort,
) -> Result<(Vec<EntityLearning>, Vec<ModelScore>)> {
    let learned = learn_eligible(store, rows, cohort, config)?;
    let scores = collect_scores(&learned);
    let mut out = Outputs::new(&config.out_dir)?;
    out.write(SCORES_FILE, &serde_json::to_string_pretty(&scores)?)?;
    write_durations_csv(out.create("durations.csv")?, &scores)?;

    let mut w = csv::Writer::from_writer(out.create("clusters.csv")?);
    w.write_record(["entity_id", "points", "min_cluster_size", "min_samples", "n_clusters", "validity"])?;
    let opt = |v: Option<usize>| v.map_or(String::new(), |v| v.to_string());
    for l in &learned {
        let c = &l.clusters;
        w.write_record([
            l.entity_id.to_string(),
            c.points.to_string(),
            opt(c.min_cluster_size),
            opt(c.min_samples),
            c.n_clusters.to_string(),
            c.validity.map_or(String::new(), |v| format!("{v:.6}")),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(out.create("importance.csv")?);
    w.write_record(["entity_id", "feature", "share"])?;
    for l in &learned {
        let Some(gbt) = l.outcome.get(ModelKind::Gbt) else { continue };
        for (feature, share) in feature_importance(&gbt.model)? {
            w.write_record([l.entity_id.to_string(), feature, format!("{share:.6}")])?;
        }
    }
    w.flush()?;

    for l in &learned {
        for m in &l.outcome.models {
            let csv = trace_csv(&m.kind.space(), &m.trace)?;
            out.write(&format!("traces/{}_{}.csv", l.entity_id, m.kind), &csv)?;
        }
        if let Some(p) = l.best_predictor() {
            out.write(&format!("{PREDICTORS_DIR}/{}.json", l.entity_id), &serde_json::to_string(&p)?)?;
        }
    }
    Ok((learned, scores))
}

pub fn load_scores(config: &ExperimentConfig) -> Result<Vec<ModelScore>> {
    let path = config.out_dir.join(SCORES_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::Pipeline(format!("{}: {e}; run learn first", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_funnel(config: &ExperimentConfig) -> Result<Funnel> {
    let path = config.out_dir.join("funnel.csv");
    let mut r = csv::Reader::from_path(&path).map_err(|e| Error::Pipeline(format!("{}: {e}; run pipeline first", path.display())))?;
    let mut f = Funnel {
        enrolled: 0,
        with_demographics: 0,
        eligible: 0,
    };
    for rec in r.records() {
        let rec = rec?;
        let count: usize = rec
            .get(1)
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::Pipeline("malformed funnel.csv".into()))?;
        match rec.get(0) {
            Some("enrolled") => f.enrolled = count,
            Some("with_demographics") => f.with_demographics = count,
            Some("eligible") => f.eligible = count,
            _ => return Err(Error::Pipeline("malformed funnel.csv".into())),
        }
    }
    Ok(f)
}

/// Per-entity scores, quartile tables and the U test.
pub fn stage_evaluate(config: &ExperimentConfig, scores: &[ModelScore]) -> Result<ScoreComparison> {
    let mut out = Outputs::new(&config.out_dir)?;
    write_models_csv(out.create("models.csv")?, scores)?;
    if config.metric.f1() {
        write_boxplot_csv(out.create("boxplot_f1.csv")?, scores, |s| s.f1)?;
    }
    if config.metric.mcc() {
        write_boxplot_csv(out.create("boxplot_mcc.csv")?, scores, |s| s.mcc)?;
    }
    let cmp = compare_f1_mcc(scores, &config.stats)?;
    out.write("stats.md", &stats_markdown(&cmp, config.stats.alpha))?;
    Ok(cmp)
}

pub fn stage_report(config: &ExperimentConfig, scores: &[ModelScore], funnel: &Funnel) -> Result<Vec<ModelSummary>> {
    let summaries = summarize(scores);
    let mut out = Outputs::new(&config.out_dir)?;
    out.write("summary.md", &summary_markdown(&summaries, funnel, config.metric))?;
    Ok(summaries)
}

/// Read every predictor a learn stage published.
pub fn load_predictors(dir: &Path) -> Result<Vec<(EntityId, Predictor)>> {
    let mut out = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::NotFound(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Pipeline(format!("bad predictor file {}", path.display())))?;
        let p: Predictor = serde_json::from_str(&fs::read_to_string(&path)?)?;
        out.push((EntityId::from(id), p));
    }
    Ok(out)
}

/// Every stage in order, all outputs under `config.out_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ReportBundle> {
    flagged(&config.out_dir, "run", || {
        let sim = stage_simulate(config)?;
        let (rows, funnel) = stage_pipeline(config, &sim.server.store)?;
        let (learned, scores) = stage_learn(config, &sim.server.store, &rows, &sim.cohort)?;
        for l in &learned {
            if let Some(p) = l.best_predictor() {
                sim.server.models.publish(l.entity_id.clone(), p);
            }
        }
        let comparison = stage_evaluate(config, &scores)?;
        let summaries = stage_report(config, &scores, &funnel)?;
        let mut files = Vec::new();
        collect_files(&config.out_dir, &mut files)?;
        files.sort();
        Ok(ReportBundle {
            out_dir: config.out_dir.clone(),
            files,
            funnel,
            summaries,
            comparison,
        })
    })
}

fn collect_files(dir: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, files)?;
        } else {
            files.push(path);
        }
    }
    Ok(())
}
