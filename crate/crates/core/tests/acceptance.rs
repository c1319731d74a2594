//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single PASS/FAIL line to stderr, bypassing the test harness capture.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use moodsense::agent::{Agent, AgentConfig};
use moodsense::evalstat::{confusion, f1_weighted, mann_whitney_u, mcc_multiclass, ConfusionMatrix};
use moodsense::expanse::{request_prediction, CloudServer, Dataset, FeatureEncoder, Predictor};
use moodsense::harness::{run_experiment, simulate, ExperimentConfig, ReportBundle};
use moodsense::learn::dummy::DummyModel;
use moodsense::learn::gbt::{leaf_weight, GbtModel, GbtParams};
use moodsense::learn::{
    autodiscover_cluster_params, density_cluster, logreg, mlp, train, ClusterModel, ModelKind, NOISE,
};
use moodsense::simworld::{build_cohort, CohortSpec, EntityId, FaultMix, FaultPlan, Point};
use moodsense::syncsec::wire::{self, Failure, FailureCode, PredictionRequest};
use moodsense::syncsec::{derive_signing_key, KeyRegistry, MessageKind, Uplink, SERVER_ID};
use moodsense::{AuthError, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn criterion(n: u32, name: &str, limit: Option<Duration>, check: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let mut outcome = check();
    let elapsed = start.elapsed();
    if let (Ok(detail), Some(limit)) = (&outcome, limit) {
        if elapsed > limit {
            outcome = Err(format!("{detail}; took {elapsed:.1?}, limit {limit:?}"));
        }
    }
    let line = match &outcome {
        Ok(detail) => format!("criterion {n:>2} PASS  {name}: {detail} [{elapsed:.2?}]"),
        Err(detail) => format!("criterion {n:>2} FAIL  {name}: {detail} [{elapsed:.2?}]"),
    };
    let _ = writeln!(std::io::stderr(), "{line}");
    if outcome.is_err() {
        panic!("{line}");
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- metrics

fn expand(m: &ConfusionMatrix) -> (Vec<usize>, Vec<usize>) {
    let mut t = Vec::new();
    let mut p = Vec::new();
    for (i, row) in m.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            for _ in 0..c {
                t.push(i);
                p.push(j);
            }
        }
    }
    (t, p)
}

/// Weighted F1 counted sample by sample.
fn f1_oracle(t: &[usize], p: &[usize], k: usize) -> f64 {
    let n = t.len() as f64;
    let mut total = 0.0;
    for c in 0..k {
        let tp = t.iter().zip(p).filter(|(a, b)| **a == c && **b == c).count() as f64;
        let pred = p.iter().filter(|&&b| b == c).count() as f64;
        let support = t.iter().filter(|&&a| a == c).count() as f64;
        let precision = if pred > 0.0 { tp / pred } else { 0.0 };
        let recall = if support > 0.0 { tp / support } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        total += support / n * f1;
    }
    total
}

/// MCC as the correlation of one-hot truth and prediction matrices.
fn mcc_oracle(t: &[usize], p: &[usize], k: usize) -> f64 {
    let n = t.len() as f64;
    let onehot = |v: &[usize]| -> Vec<Vec<f64>> {
        v.iter().map(|&c| (0..k).map(|j| if j == c { 1.0 } else { 0.0 }).collect()).collect()
    };
    let (x, y) = (onehot(t), onehot(p));
    let mean = |m: &[Vec<f64>]| -> Vec<f64> { (0..k).map(|j| m.iter().map(|r| r[j]).sum::<f64>() / n).collect() };
    let (mx, my) = (mean(&x), mean(&y));
    let cov = |a: &[Vec<f64>], ma: &[f64], b: &[Vec<f64>], mb: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(ra, rb)| (0..k).map(|j| (ra[j] - ma[j]) * (rb[j] - mb[j])).sum::<f64>())
            .sum()
    };
    let den = (cov(&x, &mx, &x, &mx) * cov(&y, &my, &y, &my)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        cov(&x, &mx, &y, &my) / den
    }
}

#[test]
fn c01_metric_oracles() {
    criterion(1, "metric oracle equivalence", Some(Duration::from_secs(5)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut worst = 0.0f64;
        for i in 0..200 {
            let mut m = ConfusionMatrix::zeros(3);
            for row in m.counts.iter_mut() {
                // some rows and columns stay empty to exercise the zero conventions
                let empty = rng.random_bool(0.1);
                for c in row.iter_mut() {
                    *c = if empty || rng.random_bool(0.15) { 0 } else { rng.random_range(0..40) };
                }
            }
            if m.total() == 0 {
                m.counts[i % 3][(i + 1) % 3] = 1;
            }
            let (t, p) = expand(&m);
            let rebuilt = confusion(&t, &p, 3).map_err(|e| e.to_string())?;
            ensure(rebuilt == m, || "confusion tally differs".into())?;
            let df1 = (f1_weighted(&m).unwrap() - f1_oracle(&t, &p, 3)).abs();
            let dmcc = (mcc_multiclass(&m).unwrap() - mcc_oracle(&t, &p, 3)).abs();
            worst = worst.max(df1).max(dmcc);
            ensure(df1 <= 1e-12 && dmcc <= 1e-12, || format!("matrix {i}: |dF1|={df1:e}, |dMCC|={dmcc:e}"))?;
        }
        Ok(format!("200 matrices, max deviation {worst:.1e}"))
    });
}

// ---------------------------------------------------------- Mann-Whitney

/// Two-sided exact p by enumerating every split of the pooled sample and
/// counting pairwise wins, ties worth one half.
fn exact_u_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let u_of = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .map(|xi| y.iter().map(|yj| if xi > yj { 1.0 } else if xi == yj { 0.5 } else { 0.0 }).sum::<f64>())
            .sum()
    };
    let observed = u_of(a, b);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let (x, y): (Vec<_>, Vec<_>) = (0..n).partition(|&i| mask & (1 << i) != 0);
        let x: Vec<f64> = x.iter().map(|&i| pooled[i]).collect();
        let y: Vec<f64> = y.iter().map(|&i| pooled[i]).collect();
        let u = u_of(&x, &y);
        total += 1;
        if u <= observed + 1e-9 {
            le += 1;
        }
        if u >= observed - 1e-9 {
            ge += 1;
        }
    }
    (observed, (2.0 * le.min(ge) as f64 / total as f64).min(1.0))
}

#[test]
fn c02_mann_whitney_exact() {
    criterion(2, "Mann-Whitney exactness", Some(Duration::from_secs(10)), || {
        let canonical = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).map_err(|e| e.to_string())?;
        ensure(canonical.u == 0.0 && (canonical.p - 0.1).abs() < 1e-12, || format!("canonical case gave {canonical:?}"))?;
        let grid: Vec<f64> = (0..9).map(|i| i as f64 * 0.5).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut cases = 0;
        for n1 in 1..=6 {
            for n2 in 1..=6 {
                for _ in 0..4 {
                    let a: Vec<f64> = (0..n1).map(|_| grid[rng.random_range(0..grid.len())]).collect();
                    let b: Vec<f64> = (0..n2).map(|_| grid[rng.random_range(0..grid.len())]).collect();
                    let got = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?;
                    let (u, p) = exact_u_oracle(&a, &b);
                    ensure((got.u - u).abs() < 1e-9 && (got.p - p).abs() <= 1e-9, || {
                        format!("a={a:?} b={b:?}: got (U={}, p={}), oracle (U={u}, p={p})", got.u, got.p)
                    })?;
                    cases += 1;
                }
            }
        }
        Ok(format!("{cases} sample pairs match enumeration; canonical U=0, p=0.1"))
    });
}

// ---------------------------------------------------------- baseline law

#[test]
fn c03_stratified_baseline_law() {
    criterion(3, "stratified baseline law", None, || {
        let priors = [0.5, 0.3, 0.2];
        let train: Vec<usize> = [(0, 50), (1, 30), (2, 20)].iter().flat_map(|&(c, n)| vec![c; n]).collect();
        let model = DummyModel::fit(&train);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draw = |rng: &mut ChaCha8Rng| {
            let u: f64 = rng.random();
            if u < priors[0] {
                0
            } else if u < priors[0] + priors[1] {
                1
            } else {
                2
            }
        };
        let n = 100_000;
        let truth: Vec<usize> = (0..n).map(|_| draw(&mut rng)).collect();
        let pred: Vec<usize> = (0..n).map(|_| model.sample(&mut rng)).collect();
        let f1 = f1_weighted(&confusion(&truth, &pred, 3).unwrap()).unwrap();
        let law: f64 = priors.iter().map(|p| p * p).sum();
        ensure((f1 - 0.38).abs() <= 0.02, || format!("weighted F1 {f1:.4}, expected 0.38 +- 0.02"))?;
        Ok(format!("weighted F1 {f1:.4}, sum of squared priors {law:.2}"))
    });
}

// ---------------------------------------------------- default experiment

struct DefaultRun {
    bundle: ReportBundle,
    elapsed: Duration,
    _dir: tempfile::TempDir,
}

fn default_run() -> &'static Result<DefaultRun, String> {
    static RUN: OnceLock<Result<DefaultRun, String>> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = ExperimentConfig {
            out_dir: dir.path().to_path_buf(),
            ..ExperimentConfig::default()
        };
        let start = Instant::now();
        let bundle = run_experiment(&cfg).map_err(|e| e.to_string())?;
        Ok(DefaultRun {
            bundle,
            elapsed: start.elapsed(),
            _dir: dir,
        })
    })
}

#[test]
fn c04_model_ordering() {
    criterion(4, "model ordering on the default cohort", None, || {
        let run = default_run().as_ref().map_err(Clone::clone)?;
        let get = |k: ModelKind| {
            run.bundle
                .summaries
                .iter()
                .find(|s| s.model == k)
                .ok_or_else(|| format!("no {k} scores"))
        };
        let (dummy, logreg, gbt, mlp) = (get(ModelKind::Dummy)?, get(ModelKind::Logreg)?, get(ModelKind::Gbt)?, get(ModelKind::Mlp)?);
        ensure(gbt.entities == 31, || format!("{} entities scored", gbt.entities))?;
        let detail = format!(
            "F1 gbt {:.3}, mlp {:.3}, logreg {:.3}, dummy {:.3}; time gbt {:.1}s, mlp {:.1}s; run {:.0?}",
            gbt.mean_f1, mlp.mean_f1, logreg.mean_f1, dummy.mean_f1, gbt.total_duration_s, mlp.total_duration_s, run.elapsed
        );
        ensure(gbt.mean_f1 >= mlp.mean_f1 - 0.02, || format!("gbt below mlp - 0.02: {detail}"))?;
        ensure(mlp.mean_f1 > logreg.mean_f1, || format!("mlp not above logreg: {detail}"))?;
        ensure(logreg.mean_f1 > dummy.mean_f1 + 0.10, || format!("logreg not 0.10 above dummy: {detail}"))?;
        ensure(gbt.total_duration_s < mlp.total_duration_s, || format!("gbt slower than mlp: {detail}"))?;
        ensure(run.elapsed < Duration::from_secs(600), || format!("over ten minutes: {detail}"))?;
        Ok(detail)
    });
}

#[test]
fn c05_funnel() {
    criterion(5, "funnel on the default cohort", None, || {
        let run = default_run().as_ref().map_err(Clone::clone)?;
        let text = std::fs::read_to_string(run.bundle.out_dir.join("funnel.csv")).map_err(|e| e.to_string())?;
        let counts: Vec<&str> = text.lines().skip(1).filter_map(|l| l.split(',').nth(1)).collect();
        ensure(counts == ["57", "49", "31"], || format!("funnel.csv gives {counts:?}"))?;
        Ok("57 -> 49 -> 31".into())
    });
}

// ------------------------------------------------------- gradient checks

fn instance(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let x = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let y = (0..n).map(|_| rng.random_range(0..3)).collect();
    (x, y)
}

fn relative_gradient_error(w: &[f64], analytic: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    let eps = 1e-6;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut probe = w.to_vec();
    for i in 0..w.len() {
        probe[i] = w[i] + eps;
        let up = f(&probe);
        probe[i] = w[i] - eps;
        let down = f(&probe);
        probe[i] = w[i];
        let g = (up - down) / (2.0 * eps);
        num += (g - analytic[i]).powi(2);
        den += g.powi(2).max(analytic[i].powi(2));
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

#[test]
fn c06_gradient_checks() {
    criterion(6, "logreg and mlp gradient checks", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut worst = 0.0f64;
        for i in 0..20 {
            let d = rng.random_range(1..6);
            let n = rng.random_range(3..15);
            let (x, y) = instance(&mut rng, n, d);
            let l2 = rng.random_range(0.0..1.0);
            let w: Vec<f64> = (0..3 * (d + 1)).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, g) = logreg::loss_and_grad(&w, &x, &y, l2);
            let err = relative_gradient_error(&w, &g, |p| logreg::loss_and_grad(p, &x, &y, l2).0);
            ensure(err <= 1e-4, || format!("logreg instance {i}: relative error {err:e}"))?;
            worst = worst.max(err);

            let hidden = rng.random_range(2..8);
            let params = mlp::init_params(d, hidden, i);
            let (_, g) = mlp::loss_and_grad(&params, &x, &y, hidden);
            let err = relative_gradient_error(&params, &g, |p| mlp::loss_and_grad(p, &x, &y, hidden).0);
            ensure(err <= 1e-4, || format!("mlp instance {i}: relative error {err:e}"))?;
            worst = worst.max(err);
        }
        Ok(format!("20 instances each, worst relative error {worst:.1e}"))
    });
}

// ------------------------------------------------------------------ GBT

#[test]
fn c07_gbt_closed_form_and_descent() {
    criterion(7, "GBT leaf closed form and monotone loss", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let g = rng.random_range(-50.0..50.0);
            let h = rng.random_range(0.0..50.0);
            let lambda = rng.random_range(0.0..10.0);
            let want = -g / (h + lambda);
            let got = leaf_weight(g, h, lambda);
            ensure((got - want).abs() <= 1e-12, || format!("G={g}, H={h}, lambda={lambda}: {got} vs {want}"))?;
        }
        let mut rounds = 0;
        for seed in 0..10 {
            let (x, y) = instance(&mut rng, 120, 4);
            let params = GbtParams {
                rounds: 15,
                max_depth: 3,
                learning_rate: 0.3,
                subsample: 1.0,
                lambda: 1.0,
                ..GbtParams::default()
            };
            let (_, losses) = GbtModel::fit_with_losses(&x, &y, &params, seed);
            for w in losses.windows(2) {
                ensure(w[1] <= w[0] + 1e-12, || format!("seed {seed}: loss rose from {} to {}", w[0], w[1]))?;
                rounds += 1;
            }
        }
        Ok(format!("50 leaf triples exact; {rounds} boosting rounds never raised the loss"))
    });
}

// ------------------------------------------------------------ clustering

fn blobs_with_outliers(seed: u64) -> (Vec<Point>, Vec<i32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 3.0).unwrap();
    let centers = [Point::new(0.0, 0.0), Point::new(40.0, 0.0)];
    let mut pts = Vec::new();
    let mut truth = Vec::new();
    for (k, c) in centers.iter().enumerate() {
        for _ in 0..50 {
            pts.push(Point::new(c.x + normal.sample(&mut rng), c.y + normal.sample(&mut rng)));
            truth.push(k as i32);
        }
    }
    while truth.iter().filter(|&&t| t == NOISE).count() < 10 {
        let p = Point::new(rng.random_range(-150.0..190.0), rng.random_range(-170.0..170.0));
        if centers.iter().all(|c| c.dist(&p) > 60.0) {
            pts.push(p);
            truth.push(NOISE);
        }
    }
    (pts, truth)
}

#[test]
fn c08_clustering() {
    criterion(8, "two blobs with outliers", None, || {
        let mut report = Vec::new();
        for seed in 0..5 {
            let (pts, truth) = blobs_with_outliers(seed);
            let (mcs, ms) = autodiscover_cluster_params(&pts, &[5, 10, 15]).map_err(|e| e.to_string())?;
            ensure((10..=25).contains(&mcs), || format!("seed {seed}: min_cluster_size {mcs} outside [10, 25]"))?;
            let labels = density_cluster(&pts, mcs, ms);
            let clusters = labels.iter().copied().max().map_or(0, |m| m + 1);
            ensure(clusters == 2, || format!("seed {seed}: {clusters} clusters"))?;
            let caught = truth.iter().zip(&labels).filter(|(t, l)| **t == NOISE && **l == NOISE).count();
            ensure(caught >= 8, || format!("seed {seed}: {caught}/10 outliers labelled noise"))?;
            report.push(format!("mcs={mcs} noise={caught}/10"));
        }
        Ok(report.join(", "))
    });
}

// ------------------------------------------------------------ robustness

fn robustness_cohort(seed: u64) -> moodsense::simworld::Cohort {
    let spec = CohortSpec {
        entities: 10,
        undisclosed: 0,
        female: 5,
        single_class: 0,
        low_reporters: 0,
        imbalanced: 0,
        days: 7.0,
        ..CohortSpec::default()
    };
    build_cohort(&spec, seed).unwrap()
}

fn plan_for(cohort: &moodsense::simworld::Cohort, mix: &FaultMix, seed: u64) -> FaultPlan {
    let ids: Vec<EntityId> = cohort.profiles.iter().map(|p| p.entity_id.clone()).collect();
    FaultPlan::generate(&ids, cohort.spec.horizon_s(), mix, seed)
}

#[test]
fn c09_robustness() {
    criterion(9, "crash recovery and exactly-once delivery", None, || {
        let cohort = robustness_cohort(9);
        let crashes = FaultMix {
            crashes: 100,
            reboots: 0,
            outages: 0,
            duplicates: 0,
            drops: 0,
            ..FaultMix::default()
        };
        let plan = plan_for(&cohort, &crashes, 9);
        let planned: Vec<(EntityId, f64)> = plan.entries().iter().map(|f| (f.entity.clone(), f.t)).collect();
        let sim = simulate(cohort, plan, &AgentConfig::default(), 3600.0, 9).map_err(|e| e.to_string())?;
        ensure(planned.len() == 100, || format!("plan holds {} crashes", planned.len()))?;
        // a crash that lands while the agent is already down joins the open outage
        let mut worst = 0.0f64;
        for (entity, t) in &planned {
            let agent = sim.agents.iter().find(|a| &a.entity_id == entity).ok_or("crash on unknown entity")?;
            let back = agent
                .recoveries
                .iter()
                .find(|r| r.crashed_at <= t + 1e-9 && r.running_at >= *t)
                .ok_or_else(|| format!("{entity}: crash at {t:.0} s never recovered"))?;
            worst = worst.max(back.running_at - t);
        }
        ensure(worst <= 900.0, || format!("slowest recovery {worst:.0} s"))?;
        ensure(sim.exactly_once(), || "crash plan lost or duplicated records".into())?;

        let mut faults = 0;
        let mut stored = 0;
        for seed in 0..3 {
            let cohort = robustness_cohort(20 + seed);
            let delivery = FaultMix {
                crashes: 10,
                reboots: 5,
                outages: 20,
                duplicates: 150,
                drops: 150,
                ..FaultMix::default()
            };
            let plan = plan_for(&cohort, &delivery, seed);
            let sim = simulate(cohort, plan, &AgentConfig::default(), 3600.0, seed).map_err(|e| e.to_string())?;
            ensure(sim.transport.dropped > 0 && sim.transport.duplicated > 0, || "no delivery faults fired".into())?;
            for a in &sim.agents {
                ensure(a.audit.exactly_once(), || format!("seed {seed} {}: {:?}", a.entity_id, a.audit))?;
                stored += a.audit.stored;
            }
            faults += sim.transport.dropped + sim.transport.duplicated;
        }
        Ok(format!(
            "100 crashes, slowest recovery {:.1} min; {faults} dropped or duplicated frames, {stored} records each stored once",
            worst / 60.0
        ))
    });
}

// ------------------------------------------------------------ duty cycle

struct Offline;

impl Uplink for Offline {
    fn is_connected(&self, _: &EntityId) -> bool {
        false
    }
    fn exchange(&mut self, _: &EntityId, _: &[u8]) -> Vec<Vec<u8>> {
        Vec::new()
    }
}

#[test]
fn c10_duty_cycle() {
    criterion(10, "duty cycle and battery drain", None, || {
        let id = EntityId::from("e000");
        let mut agent = Agent::new(
            id.clone(),
            AgentConfig::default(),
            derive_signing_key(10, id.as_str()),
            derive_signing_key(10, SERVER_ID).verifying_key(),
            10,
            0,
        );
        let day = 86_400.0;
        agent.advance(day, &mut Offline);
        let active = agent.counters().active_seconds / day;
        let drain = agent.battery_drain();
        ensure((active - 0.2).abs() <= 0.001, || format!("active fraction {active:.5}"))?;
        ensure((drain - 0.01).abs() <= 1e-6, || format!("battery drain {:.4}%/day", drain * 100.0))?;
        Ok(format!("active fraction {active:.4}, drain {:.3}%/day", drain * 100.0))
    });
}

// -------------------------------------------------------------- debounce

#[test]
fn c11_debounce() {
    use moodsense::agent::LocalStore;
    use moodsense::simworld::{Event, Payload, Valence};
    criterion(11, "report debounce", None, || {
        let cfg = AgentConfig::default();
        let window = cfg.debounce_s;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = LocalStore::new(cfg.persistence_limit_h, window, cfg.dedupe_cell_m);
        let mut t = 0.0;
        let mut expected = Vec::new();
        let mut uuid = 0u128;
        for _ in 0..1000 {
            let clicks = rng.random_range(1..6);
            let mut last = None;
            for c in 0..clicks {
                if c > 0 {
                    t += rng.random_range(0.0..window * 0.95);
                }
                let valence = Valence::ALL[rng.random_range(0..3)];
                uuid += 1;
                store.click(Event {
                    uuid: uuid::Uuid::from_u128(uuid),
                    entity_id: EntityId::from("e000"),
                    t,
                    location: None,
                    payload: Payload::Report { valence },
                });
                last = Some((t, valence));
            }
            expected.push(last.unwrap());
            t += window + rng.random_range(1.0..600.0);
        }
        store.force_flush();
        let stored: Vec<(f64, Valence)> = store.pending().map(|e| (e.t, e.valence().unwrap())).collect();
        ensure(stored.len() == expected.len(), || format!("{} reports stored for 1000 bursts", stored.len()))?;
        ensure(stored == expected, || "a stored report is not the last click of its burst".into())?;
        for w in stored.windows(2) {
            ensure(w[1].0 - w[0].0 >= window, || format!("two reports within one window at {} and {}", w[0].0, w[1].0))?;
        }
        Ok("1000 bursts, one report each, always the last click".into())
    });
}

// -------------------------------------------------------------- security

fn dummy_predictor(seed: u64) -> Predictor {
    let encoder = FeatureEncoder {
        n_clusters: 0,
        start_weekday: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let x = y.iter().map(|_| encoder.encode(None, rng.random_range(0.0..604_800.0))).collect();
    let dataset = Dataset {
        entity_id: EntityId::from("fixture"),
        x,
        class_counts: [10, 10, 10],
        y,
        feature_names: encoder.names(),
    };
    let hp = ModelKind::Dummy.hyperparams(&[]).unwrap();
    Predictor {
        clusters: ClusterModel::from_exemplars(Vec::new(), Vec::new(), Vec::new()),
        encoder,
        model: train(ModelKind::Dummy, &dataset, &hp, seed).unwrap(),
    }
}

fn failure_code(frame: &[u8]) -> Option<FailureCode> {
    let env = wire::decode(frame).ok()?;
    if env.kind != MessageKind::Failure {
        return None;
    }
    wire::open::<Failure>(&env, MessageKind::Failure).ok().map(|f| f.code)
}

#[test]
fn c12_scope_security() {
    criterion(12, "scope security", None, || {
        let seed = 12;
        let ids: Vec<EntityId> = (0..10).map(EntityId::from_index).collect();
        let server = CloudServer::with_seed(KeyRegistry::enroll_all(seed, &ids), seed);
        for id in &ids {
            server.models.publish(id.clone(), dummy_predictor(seed));
        }
        let server_key = server.verifying_key();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nonce = 0;
        for attempt in 0..100 {
            let a = &ids[rng.random_range(0..ids.len())];
            let b = loop {
                let b = &ids[rng.random_range(0..ids.len())];
                if b != a {
                    break b;
                }
            };
            let req = PredictionRequest {
                entity_id: b.clone(),
                x: rng.random_range(0.0..10_000.0),
                y: rng.random_range(0.0..10_000.0),
                t: rng.random_range(0.0..2_592_000.0),
            };
            nonce += 1;
            let key = derive_signing_key(seed, a.as_str());
            match request_prediction(&server, &key, a, &req, nonce, &server_key) {
                Err(Error::Auth(AuthError::Scope)) => {}
                other => return Err(format!("attempt {attempt}: {a} asking for {b} gave {other:?}")),
            }
            let own = PredictionRequest { entity_id: a.clone(), ..req };
            nonce += 1;
            let resp = request_prediction(&server, &key, a, &own, nonce, &server_key).map_err(|e| e.to_string())?;
            ensure(&resp.entity_id == a, || format!("answer for {} sent to {a}", resp.entity_id))?;
        }

        let mut tampered = 0;
        for attempt in 0..100 {
            let a = &ids[attempt % ids.len()];
            let key = derive_signing_key(seed, a.as_str());
            let req = PredictionRequest {
                entity_id: a.clone(),
                x: 1.0,
                y: 2.0,
                t: 3.0,
            };
            let frame = wire::seal(&key, a, MessageKind::PredictionRequest, 0, attempt as u64, &req);
            let mut env = wire::decode(&frame).map_err(|e| e.to_string())?;
            match attempt % 4 {
                0 => {
                    let i = rng.random_range(0..env.payload.len());
                    env.payload[i] ^= 1 << rng.random_range(0..8);
                }
                1 => env.nonce ^= 1 << rng.random_range(0..64),
                2 => env.signer = ids[(attempt + 1) % ids.len()].clone(),
                _ => {
                    let i = rng.random_range(0..64);
                    env.signature[i] ^= 1 << rng.random_range(0..8);
                }
            }
            let code = failure_code(&server.handle_frame(&wire::encode(&env)));
            ensure(code == Some(FailureCode::Reject), || format!("tamper {attempt} answered with {code:?}"))?;
            tampered += 1;
        }
        Ok(format!("100/100 cross-entity requests refused with a scope error; {tampered}/100 tampered envelopes rejected"))
    });
}
