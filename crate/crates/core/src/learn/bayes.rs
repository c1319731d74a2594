//! Bayesian optimisation over a [`HyperparamSpace`]: a Latin-hypercube
//! start, then expected improvement under a GP surrogate.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::gp::GaussianProcess;
use super::space::HyperparamSpace;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesConfig {
    pub budget: usize,
    pub initial_design: usize,
    /// Random candidates scored per acquisition step.
    pub candidates: usize,
    /// Exploration margin in expected improvement, standardised units.
    pub xi: f64,
    pub jitter: f64,
}

impl Default for BayesConfig {
    fn default() -> Self {
        BayesConfig {
            budget: 25,
            initial_design: 5,
            candidates: 1000,
            xi: 0.01,
            jitter: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Initial,
    Guided,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub phase: Phase,
    pub values: Vec<f64>,
    /// Raw objective; may be non-finite.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BayesResult {
    pub best_values: Vec<f64>,
    pub best_score: f64,
    pub trace: Vec<TraceEntry>,
}

fn latin_hypercube(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]; n];
    for d in 0..dim {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (p, s) in pts.iter_mut().zip(strata) {
            p[d] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    pts
}

fn expected_improvement(mean: f64, sd: f64, best: f64, xi: f64, normal: &Normal) -> f64 {
    if sd <= 1e-12 {
        return (mean - best - xi).max(0.0);
    }
    let z = (mean - best - xi) / sd;
    (mean - best - xi) * normal.cdf(z) + sd * normal.pdf(z)
}

/// Maximise `objective` over `space`. The objective sees decoded values.
/// Non-finite scores are kept in the trace but count as the worst finite
/// score for the surrogate and never become the incumbent.
pub fn bayes_optimize<F>(space: &HyperparamSpace, mut objective: F, config: &BayesConfig, seed: u64) -> Result<BayesResult>
where
    F: FnMut(&[f64]) -> f64,
{
    space.validate()?;
    if config.budget < config.initial_design || config.initial_design == 0 {
        return Err(Error::Config(format!(
            "budget {} must be at least the initial design {} (> 0)",
            config.budget, config.initial_design
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = space.len();
    let mut unit_points: Vec<Vec<f64>> = Vec::new();
    let mut trace = Vec::new();
    let mut evaluate = |u: Vec<f64>, phase: Phase, unit_points: &mut Vec<Vec<f64>>, trace: &mut Vec<TraceEntry>| {
        let values = space.decode(&u);
        let score = objective(&values);
        trace.push(TraceEntry { iteration: trace.len(), phase, values, score });
        unit_points.push(u);
    };

    let design = if dim == 0 { vec![Vec::new()] } else { latin_hypercube(config.initial_design, dim, &mut rng) };
    for u in design {
        evaluate(u, Phase::Initial, &mut unit_points, &mut trace);
    }
    // an empty space has a single point; nothing left to search
    if dim > 0 {
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        while trace.len() < config.budget {
            let y = surrogate_targets(&trace);
            let gp = GaussianProcess::fit(&unit_points, &y, config.jitter)?;
            let best = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let acq = |u: &[f64]| {
                let (m, s) = gp.predict(u);
                expected_improvement(m, s, best, config.xi * y_scale(&y), &normal)
            };
            let next = maximise_acquisition(&acq, dim, config.candidates, &mut rng);
            evaluate(next, Phase::Guided, &mut unit_points, &mut trace);
        }
    }

    let incumbent = trace
        .iter()
        .filter(|e| e.score.is_finite())
        .fold(None::<&TraceEntry>, |b, e| match b {
            Some(b) if b.score >= e.score => Some(b),
            _ => Some(e),
        });
    let (best_values, best_score) = match incumbent {
        Some(e) => (e.values.clone(), e.score),
        None => (trace[0].values.clone(), f64::NEG_INFINITY),
    };
    Ok(BayesResult { best_values, best_score, trace })
}

fn surrogate_targets(trace: &[TraceEntry]) -> Vec<f64> {
    let worst = trace.iter().map(|e| e.score).filter(|s| s.is_finite()).fold(f64::INFINITY, f64::min);
    let worst = if worst.is_finite() { worst } else { 0.0 };
    trace.iter().map(|e| if e.score.is_finite() { e.score } else { worst }).collect()
}

fn y_scale(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 { sd } else { 1.0 }
}

/// Random multistart: score uniform candidates, then hill-climb from the
/// best few with shrinking Gaussian steps.
fn maximise_acquisition(acq: &dyn Fn(&[f64]) -> f64, dim: usize, candidates: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut scored: Vec<(f64, Vec<f64>)> = (0..candidates.max(1))
        .map(|_| {
            let u: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
            (acq(&u), u)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(5);
    let mut best = scored[0].clone();
    for (mut val, mut u) in scored {
        let mut step = 0.05;
        for _ in 0..30 {
            let cand: Vec<f64> = u
                .iter()
                .map(|&c| (c + step * (rng.random::<f64>() * 2.0 - 1.0)).clamp(0.0, 1.0))
                .collect();
            let v = acq(&cand);
            if v > val {
                val = v;
                u = cand;
            } else {
                step *= 0.85;
            }
        }
        if val > best.0 {
            best = (val, u);
        }
    }
    best.1
}

/// Trace as CSV rows: `iteration,phase,<dimension names...>,score`.
pub fn trace_csv(space: &HyperparamSpace, trace: &[TraceEntry]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["iteration".to_string(), "phase".to_string()];
    header.extend(space.names().iter().map(|s| s.to_string()));
    header.push("score".into());
    w.write_record(&header)?;
    for e in trace {
        let mut row = vec![
            e.iteration.to_string(),
            match e.phase {
                Phase::Initial => "initial".into(),
                Phase::Guided => "guided".into(),
            },
        ];
        row.extend(e.values.iter().map(|v| format!("{v}")));
        row.push(format!("{}", e.score));
        w.write_record(&row)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Pipeline(e.to_string()))?)
        .map_err(|e| Error::Pipeline(e.to_string()))
}
