//! Gaussian-process regression with a squared-exponential kernel.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Length scales tried when fitting; the one with the highest log marginal
/// likelihood wins.
pub const LENGTH_SCALES: [f64; 7] = [0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2];

/// Fitted surrogate. Targets are standardised internally; predictions are
/// returned on the original scale.
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    pub length_scale: f64,
    pub jitter: f64,
    y_mean: f64,
    y_std: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn kernel(a: &[f64], b: &[f64], ell: f64) -> f64 {
    (-sq_dist(a, b) / (2.0 * ell * ell)).exp()
}

impl GaussianProcess {
    pub fn fit(x: &[Vec<f64>], y: &[f64], jitter: f64) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Contract("GP needs matching, non-empty x and y".into()));
        }
        let n = y.len() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n;
        let y_std = if var > 0.0 { var.sqrt() } else { 1.0 };
        let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_std));

        let mut best: Option<(f64, Self)> = None;
        for &ell in &LENGTH_SCALES {
            let Some(gp) = Self::fit_with(x, &ys, ell, jitter, y_mean, y_std) else { continue };
            let lml = gp.log_marginal_likelihood(&ys);
            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((lml, gp));
            }
        }
        best.map(|(_, gp)| gp)
            .ok_or_else(|| Error::Contract("kernel matrix not positive definite".into()))
    }

    fn fit_with(x: &[Vec<f64>], ys: &DVector<f64>, ell: f64, jitter: f64, y_mean: f64, y_std: f64) -> Option<Self> {
        let n = x.len();
        let k = DMatrix::from_fn(n, n, |i, j| kernel(&x[i], &x[j], ell) + if i == j { jitter } else { 0.0 });
        let chol = k.cholesky()?;
        let alpha = chol.solve(ys);
        Some(GaussianProcess {
            x: x.to_vec(),
            chol,
            alpha,
            length_scale: ell,
            jitter,
            y_mean,
            y_std,
        })
    }

    fn log_marginal_likelihood(&self, ys: &DVector<f64>) -> f64 {
        let n = ys.len() as f64;
        let log_det: f64 = self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        -0.5 * ys.dot(&self.alpha) - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    /// Largest gap between the posterior mean at a training point and its
    /// target. The jitter shifts each fitted value by `jitter * alpha_i`.
    pub fn interpolation_tolerance(&self) -> f64 {
        self.y_std * self.jitter * self.alpha.amax()
    }

    /// Posterior mean and standard deviation at `p`.
    pub fn predict(&self, p: &[f64]) -> (f64, f64) {
        let ks = DVector::from_iterator(self.x.len(), self.x.iter().map(|xi| kernel(xi, p, self.length_scale)));
        let mean = ks.dot(&self.alpha);
        let v = self.chol.solve(&ks);
        let var = (1.0 + self.jitter - ks.dot(&v)).max(0.0);
        (self.y_mean + self.y_std * mean, self.y_std * var.sqrt())
    }
}
