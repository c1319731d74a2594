use std::io::Write;
use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use moodsense::expanse::{request_prediction, CloudServer};
use moodsense::harness::{self, ExperimentConfig, Metric};
use moodsense::learn::ModelKind;
use moodsense::simworld::EntityId;
use moodsense::syncsec::wire::PredictionRequest;
use moodsense::syncsec::{derive_signing_key, spawn_tcp_server, Endpoint, KeyRegistry, TcpEndpoint, SERVER_ID};
use moodsense::{Error, Result};

#[derive(Parser)]
#[command(name = "moodsense", version, about = "Simulated mobile sensing cohort and per-entity valence models")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated model kinds, e.g. dummy,gbt.
    #[arg(long, global = true, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    #[arg(long, global = true, value_enum)]
    metric: Option<MetricArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    F1,
    Mcc,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Every stage from simulation to summary.
    Run,
    /// Simulate the cohort and sync it to the server.
    Simulate,
    /// Aggregate the synced logs and apply the eligibility rules.
    Pipeline,
    /// Cluster, build datasets and tune every model per eligible entity.
    Learn,
    /// Per-entity scores, quartile tables and the F1 vs. MCC test.
    Evaluate,
    /// The summary table.
    Report,
    /// Answer signed prediction requests over TCP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        addr: SocketAddr,
    },
    /// Send one signed prediction request.
    Predict {
        #[arg(long)]
        entity: String,
        /// Identity that signs the request; defaults to the entity itself.
        #[arg(long)]
        signer: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
        /// Seconds since the start of the simulation.
        #[arg(long)]
        t: f64,
        /// Server to ask; an in-process server is used when omitted.
        #[arg(long)]
        addr: Option<SocketAddr>,
    },
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &g.out {
        cfg.out_dir = out.clone();
    }
    if let Some(models) = &g.models {
        cfg.automl.models = models.clone();
    }
    if let Some(m) = g.metric {
        cfg.metric = match m {
            MetricArg::F1 => Metric::F1,
            MetricArg::Mcc => Metric::Mcc,
            MetricArg::Both => Metric::Both,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn server_for(cfg: &ExperimentConfig) -> Result<CloudServer> {
    let cohort = cfg.build_cohort()?;
    let ids: Vec<EntityId> = cohort.profiles.iter().map(|p| p.entity_id.clone()).collect();
    let server = CloudServer::with_seed(KeyRegistry::enroll_all(cfg.seed, &ids), cfg.seed);
    for (id, predictor) in harness::load_predictors(&cfg.out_dir.join(harness::PREDICTORS_DIR))? {
        server.models.publish(id, predictor);
    }
    Ok(server)
}

fn stage<T>(out: &Path, name: &str, body: impl FnOnce() -> Result<T>) -> Result<T> {
    harness::flagged(out, name, body)
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.global)?;
    let out = cfg.out_dir.clone();
    match cli.command {
        Command::Run => {
            let bundle = harness::run_experiment(&cfg)?;
            let summary = std::fs::read_to_string(bundle.out_dir.join("summary.md"))?;
            print!("{summary}");
        }
        Command::Simulate => {
            let sim = stage(&out, "simulate", || harness::stage_simulate(&cfg))?;
            println!(
                "{} entities, {} records stored, {} crashes, exactly once: {}",
                sim.agents.len(),
                sim.server.store.total_records(),
                sim.crashes(),
                sim.exactly_once()
            );
        }
        Command::Pipeline => {
            let (_, f) = stage(&out, "pipeline", || {
                let cohort = cfg.build_cohort()?;
                let store = harness::load_store(&cfg, &cohort)?;
                harness::stage_pipeline(&cfg, &store)
            })?;
            println!("{} enrolled, {} with demographics, {} eligible", f.enrolled, f.with_demographics, f.eligible);
        }
        Command::Learn => {
            let (_, scores) = stage(&out, "learn", || {
                let cohort = cfg.build_cohort()?;
                let store = harness::load_store(&cfg, &cohort)?;
                let (rows, _) = harness::stage_pipeline(&cfg, &store)?;
                harness::stage_learn(&cfg, &store, &rows, &cohort)
            })?;
            println!("{} entity-model scores", scores.len());
        }
        Command::Evaluate => {
            let cmp = stage(&out, "evaluate", || {
                let scores = harness::load_scores(&cfg)?;
                harness::stage_evaluate(&cfg, &scores)
            })?;
            print!("{}", harness::stats_markdown(&cmp, cfg.stats.alpha));
        }
        Command::Report => {
            stage(&out, "report", || {
                let scores = harness::load_scores(&cfg)?;
                let funnel = harness::load_funnel(&cfg)?;
                harness::stage_report(&cfg, &scores, &funnel)
            })?;
            print!("{}", std::fs::read_to_string(out.join("summary.md"))?);
        }
        Command::Serve { addr } => {
            let server = Arc::new(server_for(&cfg)?);
            let listener = TcpListener::bind(addr)?;
            println!("listening on {} with {} models", listener.local_addr()?, server.models.len());
            std::io::stdout().flush()?;
            spawn_tcp_server(listener, server)
                .join()
                .map_err(|_| Error::Pipeline("server thread panicked".into()))?;
        }
        Command::Predict {
            entity,
            signer,
            x,
            y,
            t,
            addr,
        } => {
            let signer = EntityId::from(signer.as_deref().unwrap_or(&entity));
            let key = derive_signing_key(cfg.seed, signer.as_str());
            let server_key = derive_signing_key(cfg.seed, SERVER_ID).verifying_key();
            let request = PredictionRequest {
                entity_id: EntityId::from(entity.as_str()),
                x,
                y,
                t,
            };
            let endpoint: Box<dyn Endpoint> = match addr {
                Some(addr) => Box::new(TcpEndpoint::connect(addr)?),
                None => Box::new(server_for(&cfg)?),
            };
            let nonce = rand_nonce();
            let resp = request_prediction(&*endpoint, &key, &signer, &request, nonce, &server_key)?;
            let [n, u, p] = resp.probabilities;
            println!("{} {} negative={n:.3} neutral={u:.3} positive={p:.3}", resp.entity_id, resp.class);
        }
    }
    Ok(())
}

fn rand_nonce() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(1, |d| d.as_nanos() as u64)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Auth(_) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
