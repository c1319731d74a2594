//! Multinomial logistic regression: softmax, cross-entropy, L2 penalty on
//! the weights (not the intercepts), full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::model::{softmax, N_CLASSES};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub l2: f64,
    pub iterations: usize,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams { l2: 1e-2, iterations: 500 }
    }
}

/// Weights are `N_CLASSES` rows of `n_features + 1`, intercept last.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub n_features: usize,
    pub weights: Vec<f64>,
}

fn logits(w: &[f64], x: &[f64], out: &mut [f64; N_CLASSES]) {
    let stride = x.len() + 1;
    for (k, o) in out.iter_mut().enumerate() {
        let row = &w[k * stride..(k + 1) * stride];
        *o = row[x.len()] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Mean cross-entropy plus `l2 / 2 * |W|^2`, and its gradient.
pub fn loss_and_grad(w: &[f64], x: &[Vec<f64>], y: &[usize], l2: f64) -> (f64, Vec<f64>) {
    let d = x.first().map_or(0, Vec::len);
    let stride = d + 1;
    let n = x.len().max(1) as f64;
    let mut grad = vec![0.0; w.len()];
    let mut loss = 0.0;
    let mut z = [0.0; N_CLASSES];
    for (xi, &yi) in x.iter().zip(y) {
        logits(w, xi, &mut z);
        softmax(&mut z);
        loss -= z[yi].max(1e-300).ln();
        for k in 0..N_CLASSES {
            let r = (z[k] - if k == yi { 1.0 } else { 0.0 }) / n;
            let g = &mut grad[k * stride..(k + 1) * stride];
            for (gj, xj) in g.iter_mut().zip(xi) {
                *gj += r * xj;
            }
            g[d] += r;
        }
    }
    loss /= n;
    for k in 0..N_CLASSES {
        for j in 0..d {
            let idx = k * stride + j;
            loss += 0.5 * l2 * w[idx] * w[idx];
            grad[idx] += l2 * w[idx];
        }
    }
    (loss, grad)
}

impl LogRegModel {
    /// The softmax cross-entropy Hessian is bounded by `|x|^2 / 2` per row,
    /// so a step of `1 / (max|x|^2 / 2 + l2)` never increases the loss.
    pub fn fit(x: &[Vec<f64>], y: &[usize], params: &LogRegParams) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let mut w = vec![0.0; N_CLASSES * (d + 1)];
        let max_sq = x
            .iter()
            .map(|r| 1.0 + r.iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max);
        let step = 1.0 / (0.5 * max_sq + params.l2);
        for _ in 0..params.iterations {
            let (_, g) = loss_and_grad(&w, x, y, params.l2);
            for (wi, gi) in w.iter_mut().zip(&g) {
                *wi -= step * gi;
            }
        }
        LogRegModel { n_features: d, weights: w }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut z = [0.0; N_CLASSES];
        logits(&self.weights, x, &mut z);
        softmax(&mut z);
        z.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::model::tests::{finite_difference_check, random_instance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand::Rng;

    #[test]
    fn gradient_matches_central_differences() {
        for seed in 0..20 {
            let (x, y) = random_instance(seed, 12, 4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let w: Vec<f64> = (0..N_CLASSES * 5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let l2 = 0.3;
            let (_, g) = loss_and_grad(&w, &x, &y, l2);
            let err = finite_difference_check(&w, &g, |p| loss_and_grad(p, &x, &y, l2).0);
            assert!(err <= 1e-4, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn separable_toy_is_fit_exactly() {
        // class = which coordinate is largest
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..90 {
            let c = i % 3;
            let mut r: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..0.4)).collect();
            r[c] += 1.0;
            x.push(r);
            y.push(c);
        }
        let m = LogRegModel::fit(&x, &y, &LogRegParams { l2: 1e-4, iterations: 500 });
        let acc = x
            .iter()
            .zip(&y)
            .filter(|(xi, yi)| {
                let p = m.predict_proba(xi);
                (0..3).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap() == **yi
            })
            .count();
        assert_eq!(acc, 90);
    }

    #[test]
    fn descent_is_monotone() {
        let (x, y) = random_instance(9, 40, 5);
        let params = LogRegParams { l2: 0.01, iterations: 1 };
        let mut prev = f64::INFINITY;
        let mut w_model = LogRegModel::fit(&x, &y, &LogRegParams { iterations: 0, ..params });
        let max_sq = x.iter().map(|r| 1.0 + r.iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max);
        for _ in 0..50 {
            let (loss, g) = loss_and_grad(&w_model.weights, &x, &y, params.l2);
            assert!(loss <= prev + 1e-12);
            prev = loss;
            let step = 1.0 / (0.5 * max_sq + params.l2);
            for (wi, gi) in w_model.weights.iter_mut().zip(&g) {
                *wi -= step * gi;
            }
        }
    }
}
