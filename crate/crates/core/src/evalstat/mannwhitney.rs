//! Two-sample Mann-Whitney U test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest sample size for which the exact null distribution is enumerated.
pub const EXACT_MAX: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UTest {
    /// U of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub method: PMethod,
}

impl UTest {
    /// Whether the null hypothesis of one common distribution is rejected at `alpha`.
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p < alpha
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatConfig {
    pub alpha: f64,
}

impl Default for StatConfig {
    fn default() -> Self {
        StatConfig { alpha: 0.05 }
    }
}

impl StatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.alpha < 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)))
        }
    }
}

/// Midranks (1-based) of `values`; tied values share the mean of their ranks.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<UTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Contract("Mann-Whitney U needs two non-empty samples".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    if n1 <= EXACT_MAX && n2 <= EXACT_MAX {
        let p = exact_p(&ranks, n1, r1);
        return Ok(UTest {
            u,
            p,
            method: PMethod::Exact,
        });
    }
    Ok(UTest {
        u,
        p: normal_p(&ranks, n1, n2, u),
        method: PMethod::Normal,
    })
}

/// Permutation distribution of the first sample's rank sum, counted over
/// all `C(n, n1)` subsets by dynamic programming on doubled (integer) ranks.
fn exact_p(ranks: &[f64], n1: usize, r1: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=n1).rev() {
            for s in (r..=max_sum).rev() {
                let add = ways[k - 1][s - r];
                if add != 0.0 {
                    ways[k][s] += add;
                }
            }
        }
    }
    let observed = (r1 * 2.0).round() as usize;
    let total: f64 = ways[n1].iter().sum();
    let le: f64 = ways[n1][..=observed].iter().sum();
    let ge: f64 = ways[n1][observed..].iter().sum();
    (2.0 * le.min(ge) / total).min(1.0)
}

fn normal_p(ranks: &[f64], n1: usize, n2: usize, u: f64) -> f64 {
    let n = (n1 + n2) as f64;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let (f1, f2) = (n1 as f64, n2 as f64);
    let mean = f1 * f2 / 2.0;
    let var = f1 * f2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - std.cdf(z))).min(1.0)
}
