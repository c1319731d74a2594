//! Relative validity of a density-based partition and the search over
//! clustering parameters that uses it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::hdbscan::{ClusterModel, Hierarchy, NOISE};
use crate::error::{Error, Result};
use crate::simworld::Point;

/// Scores a labelled partition; larger is better. Noise is labelled [`NOISE`].
pub trait ValidityIndex {
    fn score(&self, points: &[Point], labels: &[i32]) -> f64;
}

/// Density-based cluster validity.
///
/// Each cluster's sparseness is the heaviest internal edge of its minimum
/// spanning tree under a density-aware mutual reachability; its separation
/// is the lightest mutual reachability to the internal nodes of any other
/// cluster. A partition with a single cluster is measured against its noise
/// points and scores zero when there is none.
#[derive(Clone, Copy, Debug, Default)]
pub struct DensityValidity;

/// All-points core distance in the plane: the inverse square root of the
/// mean inverse squared distance to the other members. Coincident points
/// are skipped.
fn all_points_core(members: &[Point]) -> Vec<f64> {
    let n = members.len();
    members
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut acc = 0.0;
            for (j, q) in members.iter().enumerate() {
                let d2 = (p.x - q.x).powi(2) + (p.y - q.y).powi(2);
                if j != i && d2 > 0.0 {
                    acc += 1.0 / d2;
                }
            }
            if acc == 0.0 {
                0.0
            } else {
                ((n - 1) as f64 / acc).sqrt()
            }
        })
        .collect()
}

struct ClusterShape {
    points: Vec<Point>,
    core: Vec<f64>,
    internal: Vec<usize>,
    sparseness: f64,
}

fn shape(points: Vec<Point>) -> ClusterShape {
    let core = all_points_core(&points);
    let n = points.len();
    let mreach = |a: usize, b: usize| points[a].dist(&points[b]).max(core[a]).max(core[b]);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n >= 2 {
        // strict order (weight, lower index, higher index) makes the tree unique
        let key = |a: usize, b: usize, w: f64| (w, a.min(b), a.max(b));
        let less = |x: (f64, usize, usize), y: (f64, usize, usize)| {
            x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)).is_lt()
        };
        let mut in_tree = vec![false; n];
        let mut best = vec![f64::INFINITY; n];
        let mut from = vec![usize::MAX; n];
        let mut cur = 0;
        in_tree[0] = true;
        for _ in 1..n {
            let mut next = usize::MAX;
            for j in 0..n {
                if in_tree[j] {
                    continue;
                }
                let w = mreach(cur, j);
                if from[j] == usize::MAX || less(key(cur, j, w), key(from[j], j, best[j])) {
                    best[j] = w;
                    from[j] = cur;
                }
                if next == usize::MAX || less(key(from[j], j, best[j]), key(from[next], next, best[next])) {
                    next = j;
                }
            }
            in_tree[next] = true;
            edges.push((from[next], next, best[next]));
            cur = next;
        }
    }
    let mut degree = vec![0usize; n];
    for &(a, b, _) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let mut internal: Vec<usize> = (0..n).filter(|&i| degree[i] > 1).collect();
    if internal.is_empty() {
        internal = (0..n).collect();
    }
    let internal_edges = edges.iter().filter(|&&(a, b, _)| degree[a] > 1 && degree[b] > 1);
    let sparseness = internal_edges
        .map(|e| e.2)
        .fold(None, |m: Option<f64>, w| Some(m.map_or(w, |m| m.max(w))))
        .unwrap_or_else(|| edges.iter().map(|e| e.2).fold(0.0, f64::max));
    ClusterShape {
        points,
        core,
        internal,
        sparseness,
    }
}

fn separation(a: &ClusterShape, b: &ClusterShape) -> f64 {
    let mut best = f64::INFINITY;
    for &i in &a.internal {
        for &j in &b.internal {
            let d = a.points[i].dist(&b.points[j]).max(a.core[i]).max(b.core[j]);
            best = best.min(d);
        }
    }
    best
}

fn cluster_validity(sparse: f64, sep: f64) -> f64 {
    let denom = sparse.max(sep);
    if denom <= 0.0 || !denom.is_finite() {
        0.0
    } else {
        (sep - sparse) / denom
    }
}

impl ValidityIndex for DensityValidity {
    fn score(&self, points: &[Point], labels: &[i32]) -> f64 {
        let k = labels.iter().copied().max().unwrap_or(NOISE) + 1;
        if k <= 0 {
            return -1.0;
        }
        let group = |c: i32| -> Vec<Point> {
            points.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| *p).collect()
        };
        let clusters: Vec<ClusterShape> = (0..k).map(|c| shape(group(c))).collect();
        let n = points.len() as f64;
        if k == 1 {
            let noise = group(NOISE);
            if noise.is_empty() {
                return 0.0;
            }
            let noise = shape(noise);
            let c = &clusters[0];
            return c.points.len() as f64 / n * cluster_validity(c.sparseness, separation(c, &noise));
        }
        let mut total = 0.0;
        for (i, c) in clusters.iter().enumerate() {
            let sep = clusters
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, o)| separation(c, o))
                .fold(f64::INFINITY, f64::min);
            total += c.points.len() as f64 / n * cluster_validity(c.sparseness, sep);
        }
        total
    }
}

/// Search grid for [`autodiscover_cluster_params`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSearch {
    pub min_samples: Vec<usize>,
    pub min_cluster_sizes: Vec<usize>,
    /// Fits run on at most this many points, taken at an even stride.
    pub max_points: usize,
}

impl Default for ClusterSearch {
    fn default() -> Self {
        ClusterSearch {
            min_samples: vec![5, 10, 15],
            min_cluster_sizes: vec![10, 15, 20, 25, 30, 40, 50],
            max_points: 1500,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterChoice {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub validity: f64,
    pub model: ClusterModel,
}

/// Even-stride subsample of at most `max` points.
pub fn thin(points: &[Point], max: usize) -> Vec<Point> {
    if max == 0 || points.len() <= max {
        return points.to_vec();
    }
    (0..max).map(|i| points[i * points.len() / max]).collect()
}

/// Best `(min_cluster_size, min_samples)` by the validity index. Ties keep
/// the smaller `min_cluster_size`, then the smaller `min_samples`.
pub fn autodiscover_cluster_params(
    points: &[Point],
    min_samples_grid: &[usize],
) -> Result<(usize, usize)> {
    let search = ClusterSearch {
        min_samples: min_samples_grid.to_vec(),
        ..ClusterSearch::default()
    };
    autodiscover_with(points, &search, &DensityValidity).map(|c| (c.min_cluster_size, c.min_samples))
}

pub fn autodiscover_with(points: &[Point], search: &ClusterSearch, index: &dyn ValidityIndex) -> Result<ClusterChoice> {
    if search.min_samples.is_empty() || search.min_cluster_sizes.is_empty() {
        return Err(Error::Contract("empty clustering search grid".into()));
    }
    let pts = thin(points, search.max_points);
    let mut mcs_grid = search.min_cluster_sizes.clone();
    mcs_grid.sort_unstable();
    let mut ms_grid = search.min_samples.clone();
    ms_grid.sort_unstable();
    let mut best: Option<(f64, usize, usize)> = None;
    let mut scored: HashMap<Vec<i32>, f64> = HashMap::new();
    for &ms in &ms_grid {
        if pts.len() < ms {
            continue;
        }
        let h = Hierarchy::build(&pts, ms);
        for &mcs in &mcs_grid {
            let labels = h.labels(mcs);
            if labels.iter().all(|&l| l == NOISE) {
                continue;
            }
            let v = match scored.get(&labels) {
                Some(&v) => v,
                None => {
                    let v = index.score(&pts, &labels);
                    scored.insert(labels, v);
                    v
                }
            };
            // ties go to the smaller mcs, then the smaller ms
            let better = best.is_none_or(|(bv, bm, bs)| v > bv || (v == bv && (mcs, ms) < (bm, bs)));
            if better {
                best = Some((v, mcs, ms));
            }
        }
    }
    let Some((validity, mcs, ms)) = best else {
        return Err(Error::NoStructure);
    };
    if validity <= 0.0 {
        return Err(Error::NoStructure);
    }
    let model = ClusterModel::fit(&pts, mcs, ms);
    Ok(ClusterChoice {
        min_cluster_size: mcs,
        min_samples: ms,
        validity,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::hdbscan::tests::blobs_with_outliers;
    use crate::learn::hdbscan::density_cluster;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn tight_blob(seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 5.0).unwrap();
        (0..200).map(|_| Point::new(normal.sample(&mut rng), normal.sample(&mut rng))).collect()
    }

    fn uniform(seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..200)
            .map(|_| Point::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0)))
            .collect()
    }

    #[test]
    fn blob_fixture_lands_in_band() {
        for seed in 0..5 {
            let (pts, _) = blobs_with_outliers(seed);
            let (mcs, ms) = autodiscover_cluster_params(&pts, &[5, 10, 15]).unwrap();
            assert!((10..=25).contains(&mcs), "seed {seed}: mcs {mcs}");
            assert!([5, 10, 15].contains(&ms));
            let labels = density_cluster(&pts, mcs, ms);
            assert_eq!(labels.iter().copied().max(), Some(1));
        }
    }

    #[test]
    fn tight_blob_picks_smallest_size_and_one_cluster() {
        for seed in 0..5 {
            let pts = tight_blob(seed);
            let choice = autodiscover_with(&pts, &ClusterSearch::default(), &DensityValidity).unwrap();
            assert_eq!(choice.min_cluster_size, 10, "seed {seed}");
            assert_eq!(choice.model.n_clusters, 1);
        }
    }

    #[test]
    fn uniform_noise_has_no_structure() {
        for seed in 0..5 {
            let err = autodiscover_cluster_params(&uniform(seed), &[5, 10, 15]).unwrap_err();
            assert!(matches!(err, Error::NoStructure), "seed {seed}");
        }
    }

    #[test]
    fn empty_grid_is_a_contract_error() {
        let (pts, _) = blobs_with_outliers(0);
        assert!(matches!(autodiscover_cluster_params(&pts, &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn all_noise_scores_minus_one() {
        let pts = uniform(1);
        assert_eq!(DensityValidity.score(&pts, &vec![NOISE; pts.len()]), -1.0);
    }

    #[test]
    fn thin_keeps_an_even_stride() {
        let pts: Vec<Point> = (0..10).map(|i| Point::new(i as f64, 0.0)).collect();
        let t = thin(&pts, 5);
        assert_eq!(t.iter().map(|p| p.x).collect::<Vec<_>>(), vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(thin(&pts, 50).len(), 10);
    }

    /// Brute-force validity: dense mutual-reachability matrices and
    /// Kruskal's algorithm over every pair.
    fn oracle(points: &[Point], labels: &[i32]) -> f64 {
        let k = labels.iter().copied().max().unwrap_or(-1) + 1;
        if k <= 0 {
            return -1.0;
        }
        let members = |c: i32| -> Vec<Point> {
            (0..points.len()).filter(|&i| labels[i] == c).map(|i| points[i]).collect()
        };
        let core = |m: &[Point]| -> Vec<f64> {
            m.iter()
                .enumerate()
                .map(|(i, p)| {
                    let inv: Vec<f64> = m
                        .iter()
                        .enumerate()
                        .filter(|(j, q)| *j != i && p.dist(q) > 0.0)
                        .map(|(_, q)| p.dist(q).powf(-2.0))
                        .collect();
                    if inv.is_empty() {
                        0.0
                    } else {
                        (inv.iter().sum::<f64>() / (m.len() - 1) as f64).powf(-0.5)
                    }
                })
                .collect()
        };
        // (points, core, internal flags, sparseness)
        let describe = |m: Vec<Point>| {
            let c = core(&m);
            let n = m.len();
            let mut pairs = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    pairs.push((m[i].dist(&m[j]).max(c[i]).max(c[j]), i, j));
                }
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut comp: Vec<usize> = (0..n).collect();
            let mut tree = Vec::new();
            for (w, i, j) in pairs {
                let (ci, cj) = (comp[i], comp[j]);
                if ci != cj {
                    for x in comp.iter_mut() {
                        if *x == cj {
                            *x = ci;
                        }
                    }
                    tree.push((w, i, j));
                }
            }
            let mut deg = vec![0; n];
            for &(_, i, j) in &tree {
                deg[i] += 1;
                deg[j] += 1;
            }
            let mut internal: Vec<bool> = deg.iter().map(|&d| d > 1).collect();
            if !internal.iter().any(|&b| b) {
                internal = vec![true; n];
            }
            let inner: Vec<f64> = tree.iter().filter(|(_, i, j)| deg[*i] > 1 && deg[*j] > 1).map(|t| t.0).collect();
            let sparse = if inner.is_empty() {
                tree.iter().map(|t| t.0).fold(0.0, f64::max)
            } else {
                inner.iter().copied().fold(0.0, f64::max)
            };
            (m, c, internal, sparse)
        };
        let sep = |a: &(Vec<Point>, Vec<f64>, Vec<bool>, f64), b: &(Vec<Point>, Vec<f64>, Vec<bool>, f64)| {
            let mut best = f64::INFINITY;
            for i in (0..a.0.len()).filter(|&i| a.2[i]) {
                for j in (0..b.0.len()).filter(|&j| b.2[j]) {
                    best = best.min(a.0[i].dist(&b.0[j]).max(a.1[i]).max(b.1[j]));
                }
            }
            best
        };
        let v = |sparse: f64, s: f64| {
            let d = sparse.max(s);
            if d <= 0.0 || !d.is_finite() { 0.0 } else { (s - sparse) / d }
        };
        let groups: Vec<_> = (0..k).map(|c| describe(members(c))).collect();
        let n = points.len() as f64;
        if k == 1 {
            let noise = members(NOISE);
            if noise.is_empty() {
                return 0.0;
            }
            let noise = describe(noise);
            return groups[0].0.len() as f64 / n * v(groups[0].3, sep(&groups[0], &noise));
        }
        (0..groups.len())
            .map(|i| {
                let s = (0..groups.len()).filter(|&j| j != i).map(|j| sep(&groups[i], &groups[j])).fold(f64::INFINITY, f64::min);
                groups[i].0.len() as f64 / n * v(groups[i].3, s)
            })
            .sum()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn matches_brute_force_oracle(seed in any::<u64>(), n in 8usize..40, k in 1i32..4) {
            // points in general position: ties between spanning trees would
            // make the internal-node sets ambiguous
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points: Vec<Point> = (0..n)
                .map(|_| Point::new(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
                .collect();
            let labels: Vec<i32> = (0..points.len()).map(|_| rng.random_range(-1..k)).collect();
            let got = DensityValidity.score(&points, &labels);
            let want = oracle(&points, &labels);
            prop_assert!((got - want).abs() < 1e-9, "{got} vs {want}");
            prop_assert!((-1.0..=1.0).contains(&got));
        }
    }
}
