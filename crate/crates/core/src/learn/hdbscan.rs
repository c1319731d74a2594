//! Density-based clustering of planar positions.
//!
//! Core distances come from the `min_samples`-th nearest neighbour (the point
//! itself counts as the first). Mutual reachability turns the point set into
//! a complete graph whose minimum spanning tree is built with Prim's
//! algorithm; sorting its edges gives the single-linkage hierarchy. The
//! hierarchy is condensed so that splits smaller than `min_cluster_size`
//! count as points leaving, and the flat clustering picks, bottom-up, either
//! a cluster or the union of its selected descendants by excess-of-mass
//! stability.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::simworld::Point;

/// Label of points that belong to no cluster.
pub const NOISE: i32 = -1;

/// In single-cluster mode, points leaving the root farther than this
/// multiple of the median exit distance are noise.
const SINGLE_CLUSTER_OUTLIER_FACTOR: f64 = 3.0;

/// Core distance of every point: distance to its `k`-th nearest neighbour, self included.
pub fn core_distances(points: &[Point], k: usize) -> Vec<f64> {
    let n = points.len();
    let k = k.clamp(1, n.max(1));
    let mut buf = vec![0.0; n];
    points
        .iter()
        .map(|p| {
            for (d, q) in buf.iter_mut().zip(points) {
                *d = p.dist(q);
            }
            let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    a: usize,
    b: usize,
    w: f64,
}

fn point_cmp(p: &Point, q: &Point) -> Ordering {
    p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y))
}

/// Total order on edges by weight, then by endpoint coordinates, so that
/// ties never depend on input order.
fn edge_cmp(points: &[Point], (a1, b1, w1): (usize, usize, f64), (a2, b2, w2): (usize, usize, f64)) -> Ordering {
    let ends = |a: usize, b: usize| {
        if point_cmp(&points[a], &points[b]).is_le() {
            (points[a], points[b])
        } else {
            (points[b], points[a])
        }
    };
    let (lo1, hi1) = ends(a1, b1);
    let (lo2, hi2) = ends(a2, b2);
    w1.total_cmp(&w2)
        .then_with(|| point_cmp(&lo1, &lo2))
        .then_with(|| point_cmp(&hi1, &hi2))
}

/// Prim's algorithm on the implicit complete mutual-reachability graph.
fn mst(points: &[Point], core: &[f64]) -> Vec<Edge> {
    let n = points.len();
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n < 2 {
        return edges;
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![usize::MAX; n];
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let w = points[current].dist(&points[j]).max(core[current]).max(core[j]);
            if from[j] == usize::MAX || edge_cmp(points, (current, j, w), (from[j], j, best[j])).is_lt() {
                best[j] = w;
                from[j] = current;
            }
            if next == usize::MAX || edge_cmp(points, (from[j], j, best[j]), (from[next], next, best[next])).is_lt() {
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push(Edge {
            a: from[next],
            b: next,
            w: best[next],
        });
        current = next;
    }
    edges
}

/// One merge of the single-linkage dendrogram. Node ids below `n` are points.
#[derive(Clone, Copy, Debug)]
struct Merge {
    left: usize,
    right: usize,
    dist: f64,
    size: usize,
}

fn single_linkage(points: &[Point], mut edges: Vec<Edge>) -> Vec<Merge> {
    let n = points.len();
    edges.sort_by(|x, y| edge_cmp(points, (x.a, x.b, x.w), (y.a, y.b, y.w)));
    let mut parent: Vec<usize> = (0..2 * n).collect();
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; 2 * n];
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for e in edges {
        let ra = find(&mut parent, e.a);
        let rb = find(&mut parent, e.b);
        let id = n + merges.len();
        let merged = size[node_of[ra]] + size[node_of[rb]];
        merges.push(Merge {
            left: node_of[ra],
            right: node_of[rb],
            dist: e.w,
            size: merged,
        });
        size[id] = merged;
        parent[rb] = ra;
        node_of[ra] = id;
    }
    merges
}

/// Row of the condensed tree: `child` (a point or a cluster id) leaves
/// cluster `parent` at density level `lambda`.
#[derive(Clone, Copy, Debug)]
struct CondensedRow {
    parent: usize,
    child: usize,
    lambda: f64,
    child_size: usize,
}

/// Precomputed hierarchy for one `min_samples`; condensing for a given
/// `min_cluster_size` is cheap.
pub struct Hierarchy {
    n: usize,
    merges: Vec<Merge>,
    pub core: Vec<f64>,
}

impl Hierarchy {
    pub fn build(points: &[Point], min_samples: usize) -> Self {
        let core = core_distances(points, min_samples);
        let merges = single_linkage(points, mst(points, &core));
        Hierarchy {
            n: points.len(),
            merges,
            core,
        }
    }

    fn children(&self, node: usize) -> Option<(usize, usize, f64)> {
        (node >= self.n).then(|| {
            let m = self.merges[node - self.n];
            (m.left, m.right, m.dist)
        })
    }

    fn size(&self, node: usize) -> usize {
        if node < self.n {
            1
        } else {
            self.merges[node - self.n].size
        }
    }

    fn leaves(&self, node: usize, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.children(x) {
                None => out.push(x),
                Some((l, r, _)) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
    }

    /// Condensed tree; cluster ids start at `n` with the root.
    fn condense(&self, mcs: usize) -> (Vec<CondensedRow>, usize) {
        let n = self.n;
        let mut rows = Vec::new();
        let root = n + self.merges.len() - 1;
        let mut next_cluster = n + 1;
        // (dendrogram node, cluster it currently represents)
        let mut stack = vec![(root, n)];
        let lambda_of = |d: f64| if d > 0.0 { 1.0 / d } else { f64::INFINITY };
        let mut pts = Vec::new();
        while let Some((node, cluster)) = stack.pop() {
            let Some((l, r, d)) = self.children(node) else {
                continue;
            };
            let lambda = lambda_of(d);
            let (ls, rs) = (self.size(l), self.size(r));
            match (ls >= mcs, rs >= mcs) {
                (true, true) => {
                    for (child, size) in [(l, ls), (r, rs)] {
                        let id = next_cluster;
                        next_cluster += 1;
                        rows.push(CondensedRow {
                            parent: cluster,
                            child: id,
                            lambda,
                            child_size: size,
                        });
                        stack.push((child, id));
                    }
                }
                (big_l, big_r) => {
                    for (child, big) in [(l, big_l), (r, big_r)] {
                        if big {
                            stack.push((child, cluster));
                        } else {
                            pts.clear();
                            self.leaves(child, &mut pts);
                            rows.extend(pts.iter().map(|&p| CondensedRow {
                                parent: cluster,
                                child: p,
                                lambda,
                                child_size: 1,
                            }));
                        }
                    }
                }
            }
        }
        (rows, next_cluster - n)
    }

    /// Flat labels for `min_cluster_size`, renumbered by first appearance.
    pub fn labels(&self, mcs: usize) -> Vec<i32> {
        let n = self.n;
        if n == 0 {
            return Vec::new();
        }
        if n == 1 {
            return vec![if mcs <= 1 { 0 } else { NOISE }];
        }
        let mcs = mcs.max(2);
        let (rows, n_clusters) = self.condense(mcs);
        let root = n;
        let idx = |c: usize| c - n;

        let mut birth = vec![0.0f64; n_clusters];
        let mut parent_of = vec![usize::MAX; n_clusters];
        let mut cluster_children: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
        for r in rows.iter().filter(|r| r.child >= n) {
            birth[idx(r.child)] = r.lambda;
            parent_of[idx(r.child)] = r.parent;
            cluster_children[idx(r.parent)].push(r.child);
        }
        if cluster_children[0].is_empty() {
            return self.single_cluster_labels(&rows, mcs);
        }

        // zero-distance merges have infinite density; cap them at the densest finite level
        let cap = rows
            .iter()
            .map(|r| r.lambda)
            .filter(|l| l.is_finite())
            .fold(0.0, f64::max);
        let mut stability = vec![0.0f64; n_clusters];
        for r in &rows {
            let lambda = if r.lambda.is_finite() { r.lambda } else { cap };
            let b = birth[idx(r.parent)].min(cap);
            stability[idx(r.parent)] += (lambda - b) * r.child_size as f64;
        }

        // children always have larger ids than their parent; the root
        // (born at zero density) competes like any other cluster
        let mut selected = vec![false; n_clusters];
        let mut subtree = stability.clone();
        for c in (0..n_clusters).rev() {
            let below: f64 = cluster_children[c].iter().map(|&k| subtree[idx(k)]).sum();
            if cluster_children[c].is_empty() || stability[c] >= below {
                selected[c] = true;
                subtree[c] = stability[c];
            } else {
                subtree[c] = below;
            }
        }
        if selected[0] {
            return self.single_cluster_labels(&rows, mcs);
        }
        // keep only the topmost selected clusters
        for c in 1..n_clusters {
            let mut p = parent_of[c];
            while p != root && p != usize::MAX {
                if selected[idx(p)] {
                    selected[c] = false;
                    break;
                }
                p = parent_of[idx(p)];
            }
        }

        let mut point_cluster = vec![root; n];
        for r in rows.iter().filter(|r| r.child < n) {
            point_cluster[r.child] = r.parent;
        }
        let mut raw = vec![NOISE as i64; n];
        for (p, &c) in point_cluster.iter().enumerate() {
            let mut cur = c;
            while cur != root {
                if selected[idx(cur)] {
                    raw[p] = cur as i64;
                    break;
                }
                cur = parent_of[idx(cur)];
            }
        }
        renumber(&raw)
    }

    fn single_cluster_labels(&self, rows: &[CondensedRow], mcs: usize) -> Vec<i32> {
        let n = self.n;
        if n < mcs {
            return vec![NOISE; n];
        }
        let mut exit = vec![0.0f64; n];
        for r in rows.iter().filter(|r| r.child < n) {
            exit[r.child] = if r.lambda.is_infinite() { 0.0 } else { 1.0 / r.lambda };
        }
        let mut sorted = exit.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[n / 2];
        exit.iter()
            .map(|&d| if d <= SINGLE_CLUSTER_OUTLIER_FACTOR * median { 0 } else { NOISE })
            .collect()
    }
}

fn renumber(raw: &[i64]) -> Vec<i32> {
    let mut map: Vec<(i64, i32)> = Vec::new();
    raw.iter()
        .map(|&r| {
            if r < 0 {
                return NOISE;
            }
            if let Some(&(_, l)) = map.iter().find(|(k, _)| *k == r) {
                return l;
            }
            let l = map.len() as i32;
            map.push((r, l));
            l
        })
        .collect()
}

/// Cluster `points`. Fewer points than `min_samples` are all noise.
pub fn density_cluster(points: &[Point], min_cluster_size: usize, min_samples: usize) -> Vec<i32> {
    if points.len() < min_samples.max(1) {
        return vec![NOISE; points.len()];
    }
    Hierarchy::build(points, min_samples).labels(min_cluster_size)
}

/// Fitted clustering that can place new positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub n_clusters: usize,
    /// Non-noise training points with their cluster and core distance.
    pub exemplars: Vec<Point>,
    pub exemplar_labels: Vec<usize>,
    pub exemplar_core: Vec<f64>,
}

impl ClusterModel {
    pub fn fit(points: &[Point], min_cluster_size: usize, min_samples: usize) -> Self {
        if points.len() < min_samples.max(1) {
            return Self::from_exemplars(Vec::new(), Vec::new(), Vec::new()).with_params(min_cluster_size, min_samples);
        }
        let h = Hierarchy::build(points, min_samples);
        Self::from_hierarchy(points, &h, min_cluster_size, min_samples)
    }

    pub fn from_hierarchy(points: &[Point], h: &Hierarchy, min_cluster_size: usize, min_samples: usize) -> Self {
        let labels = h.labels(min_cluster_size);
        let mut exemplars = Vec::new();
        let mut exemplar_labels = Vec::new();
        let mut exemplar_core = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            if l >= 0 {
                exemplars.push(points[i]);
                exemplar_labels.push(l as usize);
                exemplar_core.push(h.core[i]);
            }
        }
        Self::from_exemplars(exemplars, exemplar_labels, exemplar_core).with_params(min_cluster_size, min_samples)
    }

    pub fn from_exemplars(exemplars: Vec<Point>, exemplar_labels: Vec<usize>, exemplar_core: Vec<f64>) -> Self {
        let n_clusters = exemplar_labels.iter().map(|&l| l + 1).max().unwrap_or(0);
        ClusterModel {
            min_cluster_size: 0,
            min_samples: 0,
            n_clusters,
            exemplars,
            exemplar_labels,
            exemplar_core,
        }
    }

    fn with_params(mut self, mcs: usize, ms: usize) -> Self {
        self.min_cluster_size = mcs;
        self.min_samples = ms;
        self
    }

    /// Cluster of the nearest exemplar if `p` lies within that exemplar's
    /// core distance; `None` (noise) otherwise.
    pub fn assign(&self, p: &Point) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (i, q) in self.exemplars.iter().enumerate() {
            let d = p.dist(q);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        let (d, i) = best?;
        (d <= self.exemplar_core[i]).then_some(self.exemplar_labels[i])
    }
}
