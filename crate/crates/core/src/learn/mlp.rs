//! One-hidden-layer perceptron: rectifier hidden units, softmax output,
//! cross-entropy loss, minibatch Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::model::{softmax, N_CLASSES};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams { hidden: 16, learning_rate: 1e-2, epochs: 50, batch_size: 32 }
    }
}

/// Parameters in one flat vector: hidden weights (`hidden x d`), hidden
/// biases, output weights (`N_CLASSES x hidden`), output biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub n_features: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

struct Layout {
    d: usize,
    h: usize,
}

impl Layout {
    fn w1(&self) -> usize {
        0
    }
    fn b1(&self) -> usize {
        self.h * self.d
    }
    fn w2(&self) -> usize {
        self.b1() + self.h
    }
    fn b2(&self) -> usize {
        self.w2() + N_CLASSES * self.h
    }
    fn len(&self) -> usize {
        self.b2() + N_CLASSES
    }
}

/// Forward pass; fills `hidden` with post-activation values and returns
/// class probabilities.
fn forward(p: &[f64], l: &Layout, x: &[f64], hidden: &mut [f64]) -> [f64; N_CLASSES] {
    for (j, a) in hidden.iter_mut().enumerate() {
        let row = &p[l.w1() + j * l.d..l.w1() + (j + 1) * l.d];
        let z = p[l.b1() + j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        *a = z.max(0.0);
    }
    let mut out = [0.0; N_CLASSES];
    for (k, o) in out.iter_mut().enumerate() {
        let row = &p[l.w2() + k * l.h..l.w2() + (k + 1) * l.h];
        *o = p[l.b2() + k] + row.iter().zip(hidden.iter()).map(|(w, a)| w * a).sum::<f64>();
    }
    softmax(&mut out);
    out
}

/// Mean cross-entropy over `rows` and its gradient, written into `grad`.
fn batch_loss_grad(p: &[f64], l: &Layout, x: &[Vec<f64>], y: &[usize], rows: &[usize], grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut hidden = vec![0.0; l.h];
    let mut dh = vec![0.0; l.h];
    let n = rows.len().max(1) as f64;
    let mut loss = 0.0;
    for &i in rows {
        let xi = &x[i];
        let prob = forward(p, l, xi, &mut hidden);
        loss -= prob[y[i]].max(1e-300).ln();
        dh.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..N_CLASSES {
            let r = (prob[k] - if k == y[i] { 1.0 } else { 0.0 }) / n;
            grad[l.b2() + k] += r;
            let w2 = l.w2() + k * l.h;
            for j in 0..l.h {
                grad[w2 + j] += r * hidden[j];
                dh[j] += r * p[w2 + j];
            }
        }
        for j in 0..l.h {
            if hidden[j] <= 0.0 {
                continue;
            }
            grad[l.b1() + j] += dh[j];
            let w1 = l.w1() + j * l.d;
            for (g, v) in grad[w1..w1 + l.d].iter_mut().zip(xi) {
                *g += dh[j] * v;
            }
        }
    }
    loss / n
}

/// Mean cross-entropy of a flat parameter vector over all rows, and its
/// gradient.
pub fn loss_and_grad(params: &[f64], x: &[Vec<f64>], y: &[usize], hidden: usize) -> (f64, Vec<f64>) {
    let l = Layout { d: x.first().map_or(0, Vec::len), h: hidden };
    let mut grad = vec![0.0; l.len()];
    let rows: Vec<usize> = (0..x.len()).collect();
    let loss = batch_loss_grad(params, &l, x, y, &rows, &mut grad);
    (loss, grad)
}

/// He-initialised parameters.
pub fn init_params(n_features: usize, hidden: usize, seed: u64) -> Vec<f64> {
    let l = Layout { d: n_features, h: hidden };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = vec![0.0; l.len()];
    let n1 = Normal::new(0.0, (2.0 / n_features.max(1) as f64).sqrt()).expect("finite sd");
    let n2 = Normal::new(0.0, (2.0 / hidden.max(1) as f64).sqrt()).expect("finite sd");
    for v in &mut p[l.w1()..l.b1()] {
        *v = n1.sample(&mut rng);
    }
    for v in &mut p[l.w2()..l.b2()] {
        *v = n2.sample(&mut rng);
    }
    p
}

impl MlpModel {
    pub fn fit(x: &[Vec<f64>], y: &[usize], params: &MlpParams, seed: u64) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let h = params.hidden.max(1);
        let l = Layout { d, h };
        let mut p = init_params(d, h, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let mut m = vec![0.0; p.len()];
        let mut v = vec![0.0; p.len()];
        let mut g = vec![0.0; p.len()];
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut t = 0i32;
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(params.batch_size.max(1)) {
                batch_loss_grad(&p, &l, x, y, batch, &mut g);
                t += 1;
                let c1 = 1.0 - f64::powi(b1, t);
                let c2 = 1.0 - f64::powi(b2, t);
                for i in 0..p.len() {
                    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                    p[i] -= params.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
        }
        MlpModel { n_features: d, hidden: h, params: p }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let l = Layout { d: self.n_features, h: self.hidden };
        let mut hidden = vec![0.0; self.hidden];
        forward(&self.params, &l, x, &mut hidden).to_vec()
    }
}
