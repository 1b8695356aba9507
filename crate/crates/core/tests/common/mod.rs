//! Brute-force reference implementations shared by the integration tests.
//! Each one is O(n²) or worse and shares no code with the library.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use gnperc::geometry::{pair_distance, sample_poisson, BoxRegion, Metric, PointSet};
use gnperc::gnmodel::Variant;

pub fn sample(dim: usize, side: f64, density: f64, seed: u64, metric: Metric) -> PointSet {
    let b = BoxRegion::cube(dim, 0.0, side).unwrap();
    sample_poisson(&b, density, seed, metric).unwrap()
}

pub fn dist(ps: &PointSet, i: usize, j: usize) -> f64 {
    pair_distance(ps.point(i), ps.point(j), ps.bbox(), ps.metric())
}

/// All other points of `i` sorted by distance, ties by index.
pub fn sorted_neighbours(ps: &PointSet, i: usize) -> Vec<(f64, usize)> {
    let mut v: Vec<(f64, usize)> = (0..ps.len())
        .filter(|&j| j != i)
        .map(|j| (dist(ps, i, j), j))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    v
}

/// `d_k(x_i)` for `k = 1..=kmax`.
pub fn brute_knn(ps: &PointSet, i: usize, kmax: usize) -> Vec<f64> {
    sorted_neighbours(ps, i)
        .into_iter()
        .take(kmax)
        .map(|(d, _)| d)
        .collect()
}

/// `r(x) = Σ α_k d_k(x)` from the brute table.
pub fn brute_ranges(ps: &PointSet, alpha: &[f64]) -> Vec<f64> {
    (0..ps.len())
        .map(|i| {
            brute_knn(ps, i, alpha.len())
                .iter()
                .zip(alpha)
                .map(|(d, a)| d * a)
                .sum()
        })
        .collect()
}

pub fn brute_edges(ps: &PointSet, r: &[f64], variant: Variant) -> BTreeSet<(usize, usize)> {
    let mut e = BTreeSet::new();
    for x in 0..ps.len() {
        for y in x + 1..ps.len() {
            let d = dist(ps, x, y);
            let joined = match variant {
                Variant::ReachUnion => d <= r[x].max(r[y]),
                Variant::BooleanOverlap => d <= r[x] + r[y],
            };
            if joined {
                e.insert((x, y));
            }
        }
    }
    e
}

/// Component partition by breadth-first search, as sorted vertex sets.
pub fn bfs_partition(n: usize, edges: &[(usize, usize)]) -> BTreeSet<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; n];
    let mut parts = BTreeSet::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut q = VecDeque::from([s]);
        while let Some(x) = q.pop_front() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    comp.push(y);
                    q.push_back(y);
                }
            }
        }
        comp.sort_unstable();
        parts.insert(comp);
    }
    parts
}

/// `|observed - expected| <= k · se`.
pub fn within_sigmas(observed: f64, expected: f64, se: f64, k: f64) -> bool {
    (observed - expected).abs() <= k * se
}
