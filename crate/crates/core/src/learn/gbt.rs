//! Multiclass gradient boosting: each round fits one regression tree per
//! class to the softmax gradients, using second-order leaf weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{softmax, N_CLASSES};

/// Most distinct split points kept per feature.
const MAX_BINS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum hessian mass on each side of a split.
    pub min_child_weight: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            rounds: 50,
            max_depth: 3,
            learning_rate: 0.1,
            subsample: 1.0,
            lambda: 1.0,
            min_child_weight: 0.5,
        }
    }
}

/// Newton step for a leaf.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

/// Loss reduction from splitting a node into left and right parts.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    /// Rows with `x[feature] < threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] < threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub n_features: usize,
    pub base_score: [f64; N_CLASSES],
    /// One tree per class per round.
    pub rounds: Vec<Vec<Tree>>,
    /// Summed split gain per feature.
    pub gains: Vec<f64>,
}

/// Training matrix quantised to per-feature bins.
struct Binned {
    /// `bins[f][i]` is the bin of row `i` in feature `f`.
    bins: Vec<Vec<u8>>,
    /// Split thresholds between consecutive bins.
    cuts: Vec<Vec<f64>>,
}

fn quantise(x: &[Vec<f64>], d: usize) -> Binned {
    let mut bins = Vec::with_capacity(d);
    let mut cuts = Vec::with_capacity(d);
    for f in 0..d {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        if vals.len() > MAX_BINS {
            vals = (0..MAX_BINS).map(|i| vals[i * vals.len() / MAX_BINS]).collect();
        }
        let c: Vec<f64> = vals.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        bins.push(
            x.iter()
                .map(|r| c.partition_point(|&t| t <= r[f]) as u8)
                .collect(),
        );
        cuts.push(c);
    }
    Binned { bins, cuts }
}

struct Grower<'a> {
    data: &'a Binned,
    g: &'a [f64],
    h: &'a [f64],
    params: &'a GbtParams,
    gains: &'a mut [f64],
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let (gs, hs) = rows.iter().fold((0.0, 0.0), |(a, b), &i| (a + self.g[i], b + self.h[i]));
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: self.params.learning_rate * leaf_weight(gs, hs, self.params.lambda),
        });
        if depth >= self.params.max_depth || rows.len() < 2 {
            return id;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for (f, cuts) in self.data.cuts.iter().enumerate() {
            if cuts.is_empty() {
                continue;
            }
            let nb = cuts.len() + 1;
            let mut hg = vec![0.0; nb];
            let mut hh = vec![0.0; nb];
            for &i in &rows {
                let b = self.data.bins[f][i] as usize;
                hg[b] += self.g[i];
                hh[b] += self.h[i];
            }
            let (mut gl, mut hl) = (0.0, 0.0);
            for b in 0..nb - 1 {
                gl += hg[b];
                hl += hh[b];
                let (gr, hr) = (gs - gl, hs - hl);
                if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                    continue;
                }
                let gain = split_gain(gl, hl, gr, hr, self.params.lambda);
                if gain > 1e-12 && best.is_none_or(|(bg, _, _)| gain > bg) {
                    best = Some((gain, f, b));
                }
            }
        }
        let Some((gain, f, b)) = best else { return id };
        self.gains[f] += gain;
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| (self.data.bins[f][i] as usize) <= b);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split { feature: f, threshold: self.data.cuts[f][b], left, right };
        id
    }
}

/// Mean softmax cross-entropy of raw scores.
fn mean_loss(scores: &[[f64; N_CLASSES]], y: &[usize]) -> f64 {
    let n = y.len().max(1) as f64;
    scores
        .iter()
        .zip(y)
        .map(|(s, &c)| {
            let mut p = *s;
            softmax(&mut p);
            -p[c].max(1e-300).ln()
        })
        .sum::<f64>()
        / n
}

impl GbtModel {
    pub fn fit(x: &[Vec<f64>], y: &[usize], params: &GbtParams, seed: u64) -> Self {
        Self::fit_with_losses(x, y, params, seed).0
    }

    /// Also returns the training loss before the first round and after each one.
    pub fn fit_with_losses(x: &[Vec<f64>], y: &[usize], params: &GbtParams, seed: u64) -> (Self, Vec<f64>) {
        let n = x.len();
        let d = x.first().map_or(0, Vec::len);
        let mut counts = [0.0f64; N_CLASSES];
        for &c in y {
            counts[c] += 1.0;
        }
        let base_score = counts.map(|c| (c.max(1e-6) / n.max(1) as f64).ln());
        let data = quantise(x, d);
        let mut scores = vec![base_score; n];
        let mut gains = vec![0.0; d];
        let mut losses = vec![mean_loss(&scores, y)];
        let mut rounds = Vec::with_capacity(params.rounds);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut all: Vec<usize> = (0..n).collect();
        let take = ((params.subsample.clamp(0.0, 1.0) * n as f64).round() as usize).clamp(1.min(n), n);
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for _ in 0..params.rounds {
            let rows: Vec<usize> = if take < n {
                all.shuffle(&mut rng);
                let mut r = all[..take].to_vec();
                r.sort_unstable();
                r
            } else {
                all.clone()
            };
            let probs: Vec<[f64; N_CLASSES]> = scores
                .iter()
                .map(|s| {
                    let mut p = *s;
                    softmax(&mut p);
                    p
                })
                .collect();
            let mut trees = Vec::with_capacity(N_CLASSES);
            for k in 0..N_CLASSES {
                for i in 0..n {
                    let p: f64 = probs[i][k];
                    g[i] = p - if y[i] == k { 1.0 } else { 0.0 };
                    h[i] = (2.0 * p * (1.0 - p)).max(1e-16);
                }
                let mut grower = Grower { data: &data, g: &g, h: &h, params, gains: &mut gains, nodes: Vec::new() };
                grower.grow(rows.clone(), 0);
                trees.push(Tree { nodes: grower.nodes });
            }
            for (s, xi) in scores.iter_mut().zip(x) {
                for (k, t) in trees.iter().enumerate() {
                    s[k] += t.predict(xi);
                }
            }
            losses.push(mean_loss(&scores, y));
            rounds.push(trees);
        }
        (GbtModel { n_features: d, base_score, rounds, gains }, losses)
    }

    pub fn raw_scores(&self, x: &[f64]) -> [f64; N_CLASSES] {
        let mut s = self.base_score;
        for trees in &self.rounds {
            for (k, t) in trees.iter().enumerate() {
                s[k] += t.predict(x);
            }
        }
        s
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.raw_scores(x);
        softmax(&mut s);
        s.to_vec()
    }

    /// Gain share per feature index; empty when no split was ever made.
    pub fn importance(&self) -> Vec<(usize, f64)> {
        let total: f64 = self.gains.iter().sum();
        if total <= 0.0 {
            return Vec::new();
        }
        self.gains.iter().enumerate().map(|(f, g)| (f, g / total)).collect()
    }
}
