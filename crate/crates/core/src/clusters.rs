//! Connected components, crossing detection and directed out-clusters.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoxRegion, PointSet};
use crate::gnmodel::GNGraph;

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }
}

/// Component label per point; a component's id is its smallest point index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabeling {
    pub labels: Vec<usize>,
    pub sizes: BTreeMap<usize, usize>,
    pub largest_fraction: f64,
}

impl ClusterLabeling {
    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn largest(&self) -> usize {
        self.sizes.values().copied().max().unwrap_or(0)
    }

    /// CSV with header `component,size`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "component,size")?;
        for (c, s) in &self.sizes {
            writeln!(w, "{c},{s}")?;
        }
        Ok(())
    }
}

pub fn label_clusters(graph: &GNGraph) -> ClusterLabeling {
    let n = graph.len();
    let mut uf = UnionFind::new(n);
    for &(u, v) in graph.edges() {
        uf.union(u, v);
    }
    let mut root_label = vec![usize::MAX; n];
    let mut labels = vec![0; n];
    let mut sizes = BTreeMap::new();
    for (x, label) in labels.iter_mut().enumerate() {
        let r = uf.find(x);
        if root_label[r] == usize::MAX {
            root_label[r] = x;
        }
        *label = root_label[r];
        *sizes.entry(root_label[r]).or_insert(0) += 1;
    }
    let largest = sizes.values().copied().max().unwrap_or(0);
    ClusterLabeling {
        labels,
        sizes,
        largest_fraction: if n == 0 {
            0.0
        } else {
            largest as f64 / n as f64
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub axis: usize,
    pub inner_box: BoxRegion,
    pub crossing: bool,
    pub crossing_component: Option<usize>,
}

/// Width of the face slabs used for contact: one grid cell, `(1/λ)^{1/d}`.
pub fn face_slab_width(points: &PointSet) -> f64 {
    (1.0 / points.density()).powf(1.0 / points.dim() as f64)
}

/// Whether one component touches both faces of `inner_box` normal to `axis`.
///
/// A point touches a face when it lies in `inner_box` within one slab width
/// of it. Components come from the full graph, so points outside the inner
/// box can still link the two faces.
pub fn crossing_exists(
    labeling: &ClusterLabeling,
    points: &PointSet,
    inner_box: &BoxRegion,
    axis: usize,
) -> Result<CrossingReport> {
    if axis >= points.dim() {
        return Err(Error::domain(
            "crossing_exists",
            format!("axis {axis} out of range for dimension {}", points.dim()),
        ));
    }
    if inner_box.dim() != points.dim() {
        return Err(Error::InvalidBox(
            "inner box dimension differs from the point set".into(),
        ));
    }
    if labeling.labels.len() != points.len() {
        return Err(Error::domain(
            "crossing_exists",
            "labeling does not match the point set",
        ));
    }
    let w = face_slab_width(points);
    let lo = inner_box.lower()[axis];
    let hi = inner_box.upper()[axis];
    let mut low_touch = BTreeSet::new();
    let mut high_touch = BTreeSet::new();
    for (i, p) in points.iter().enumerate() {
        if !inner_box.contains(p) {
            continue;
        }
        if p[axis] <= lo + w {
            low_touch.insert(labeling.labels[i]);
        }
        if p[axis] >= hi - w {
            high_touch.insert(labeling.labels[i]);
        }
    }
    let crossing_component = low_touch.intersection(&high_touch).next().copied();
    Ok(CrossingReport {
        axis,
        inner_box: inner_box.clone(),
        crossing: crossing_component.is_some(),
        crossing_component,
    })
}

/// Points reachable from `origin` along directed reach edges.
pub fn out_cluster(graph: &GNGraph, origin: usize) -> Result<BTreeSet<usize>> {
    if origin >= graph.len() {
        return Err(Error::domain(
            "out_cluster",
            format!("origin {origin} out of range for {} points", graph.len()),
        ));
    }
    let mut seen = BTreeSet::from([origin]);
    let mut queue = VecDeque::from([origin]);
    while let Some(x) = queue.pop_front() {
        for &y in graph.reach(x) {
            if seen.insert(y) {
                queue.push_back(y);
            }
        }
    }
    Ok(seen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Metric;
    use crate::gnmodel::{build_graph, RangeField, Variant};

    fn line_graph(xs: &[f64], r: &[f64]) -> (PointSet, GNGraph) {
        let b = BoxRegion::cube(1, 0.0, 10.0).unwrap();
        let ps = PointSet::from_coords(b, 1.0, xs.to_vec(), Metric::EuclideanFree, 0).unwrap();
        let rf = RangeField {
            ranges: r.to_vec(),
            truncation_bound: 0.0,
            kmax_used: 1,
        };
        let g = build_graph(&ps, &rf, Variant::ReachUnion).unwrap();
        (ps, g)
    }

    #[test]
    fn singletons_and_paths() {
        let (_, g) = line_graph(&[0.0, 2.0, 4.0, 6.0, 8.0], &[0.0; 5]);
        let l = label_clusters(&g);
        assert_eq!(l.component_count(), 5);
        assert_eq!(l.largest_fraction, 0.2);
        let (_, g) = line_graph(&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0]);
        let l = label_clusters(&g);
        assert_eq!(l.labels, vec![0, 0, 0]);
        assert_eq!(l.sizes[&0], 3);
    }

    #[test]
    fn crossing_cases() {
        let inner = BoxRegion::cube(1, 0.0, 10.0).unwrap();
        let (ps, g) = line_graph(&[0.5, 3.0, 6.0, 9.5], &[4.0; 4]);
        let rep = crossing_exists(&label_clusters(&g), &ps, &inner, 0).unwrap();
        assert!(rep.crossing);
        assert_eq!(rep.crossing_component, Some(0));
        let (ps, g) = line_graph(&[0.5, 3.0, 6.0, 9.5], &[0.0; 4]);
        assert!(
            !crossing_exists(&label_clusters(&g), &ps, &inner, 0)
                .unwrap()
                .crossing
        );
        assert!(crossing_exists(&label_clusters(&g), &ps, &inner, 1).is_err());
    }

    #[test]
    fn out_cluster_chain() {
        // 0 -> 1 -> 2, nothing reaches back
        let (_, g) = line_graph(&[0.0, 1.0, 1.5], &[1.0, 0.5, 0.0]);
        assert_eq!(out_cluster(&g, 0).unwrap(), BTreeSet::from([0, 1, 2]));
        assert_eq!(out_cluster(&g, 2).unwrap(), BTreeSet::from([2]));
        assert!(out_cluster(&g, 3).is_err());
    }

    #[test]
    fn component_csv() {
        let (_, g) = line_graph(&[0.0, 1.0, 5.0], &[1.0, 0.0, 0.0]);
        let mut out = Vec::new();
        label_clusters(&g).write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "component,size\n0,2\n2,1\n"
        );
    }
}
