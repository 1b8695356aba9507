use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AlphaSpec, RangeField};
use crate::error::{Error, Result};
use crate::geometry::{GridIndex, PointSet};

/// How directed reaches become undirected edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `{x, y}` iff `|x - y| <= max(r(x), r(y))`.
    #[default]
    ReachUnion,
    /// `{x, y}` iff `|x - y| <= r(x) + r(y)`.
    BooleanOverlap,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::ReachUnion => "reach-union",
            Variant::BooleanOverlap => "boolean-overlap",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reach-union" => Ok(Variant::ReachUnion),
            "boolean-overlap" => Ok(Variant::BooleanOverlap),
            _ => Err(Error::domain(
                "Variant",
                format!("unknown graph variant '{s}'"),
            )),
        }
    }
}

/// A GN graph: the directed reach relation `x -> y iff |x - y| <= r(x)`
/// plus the undirected edge set of the chosen variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GNGraph {
    n: usize,
    variant: Variant,
    out_offsets: Vec<usize>,
    out_targets: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl GNGraph {
    fn from_reach(
        n: usize,
        variant: Variant,
        out: Vec<Vec<usize>>,
        edges: Vec<(usize, usize)>,
    ) -> Self {
        let mut out_offsets = Vec::with_capacity(n + 1);
        out_offsets.push(0);
        let mut out_targets = Vec::new();
        for mut row in out {
            row.sort_unstable();
            out_targets.extend_from_slice(&row);
            out_offsets.push(out_targets.len());
        }
        GNGraph {
            n,
            variant,
            out_offsets,
            out_targets,
            edges,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Points reached by `x`, sorted.
    pub fn reach(&self, x: usize) -> &[usize] {
        &self.out_targets[self.out_offsets[x]..self.out_offsets[x + 1]]
    }

    pub fn out_degree(&self, x: usize) -> usize {
        self.out_offsets[x + 1] - self.out_offsets[x]
    }

    pub fn reach_edge_count(&self) -> usize {
        self.out_targets.len()
    }

    /// Undirected edges `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Undirected adjacency lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// Edge-list CSV with header `u,v`.
    pub fn write_edge_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "u,v")?;
        for (u, v) in &self.edges {
            writeln!(w, "{u},{v}")?;
        }
        Ok(())
    }

    /// Adjacency JSON carrying the parameters needed to regenerate the graph.
    pub fn write_adjacency_json<W: Write>(
        &self,
        points: &PointSet,
        alpha: &AlphaSpec,
        w: W,
    ) -> Result<()> {
        let reach: Vec<&[usize]> = (0..self.n).map(|x| self.reach(x)).collect();
        let doc = serde_json::json!({
            "variant": self.variant,
            "alpha": alpha,
            "density": points.density(),
            "seed": points.seed(),
            "dim": points.dim(),
            "bbox": { "lower": points.bbox().lower(), "upper": points.bbox().upper() },
            "metric": points.metric(),
            "n": self.n,
            "adjacency": self.adjacency(),
            "reach": reach,
        });
        serde_json::to_writer_pretty(w, &doc)?;
        Ok(())
    }
}

fn undirected_closure(out: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = out
        .iter()
        .enumerate()
        .flat_map(|(x, row)| row.iter().map(move |&y| (x.min(y), x.max(y))))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Build the GN graph from precomputed ranges using grid radius queries.
pub fn build_graph(points: &PointSet, ranges: &RangeField, variant: Variant) -> Result<GNGraph> {
    let n = points.len();
    if ranges.len() != n {
        return Err(Error::domain(
            "build_graph",
            format!("{} ranges for {} points", ranges.len(), n),
        ));
    }
    let r = &ranges.ranges;
    let grid = GridIndex::new(points);
    let out: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut row = Vec::new();
            grid.for_each_within(points.point(x), r[x], |y, _| {
                if y != x {
                    row.push(y);
                }
            });
            row
        })
        .collect();
    let edges = match variant {
        Variant::ReachUnion => undirected_closure(&out),
        Variant::BooleanOverlap => {
            let rmax = ranges.max();
            let mut edges: Vec<(usize, usize)> = (0..n)
                .into_par_iter()
                .flat_map_iter(|x| {
                    let mut row = Vec::new();
                    grid.for_each_within(points.point(x), r[x] + rmax, |y, d| {
                        if y > x && d <= r[x] + r[y] {
                            row.push((x, y));
                        }
                    });
                    row
                })
                .collect();
            edges.sort_unstable();
            edges
        }
    };
    Ok(GNGraph::from_reach(n, variant, out, edges))
}

/// `NN(d, k)` built by all-pairs sorting, independent of [`build_graph`].
pub fn nn_reference_graph(points: &PointSet, k: usize) -> Result<GNGraph> {
    let n = points.len();
    if n <= k {
        return Err(Error::InsufficientPoints {
            points: n,
            required: k + 1,
        });
    }
    let out: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut all: Vec<(f64, usize)> = (0..n)
                .filter(|&y| y != x)
                .map(|y| (points.distance(x, y), y))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            all.truncate(k);
            all.into_iter().map(|(_, y)| y).collect()
        })
        .collect();
    let edges = undirected_closure(&out);
    Ok(GNGraph::from_reach(n, Variant::ReachUnion, out, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{knn_table, sample_poisson, BoxRegion, Metric};
    use crate::gnmodel::connection_ranges;

    fn line(xs: &[f64]) -> PointSet {
        let b = BoxRegion::cube(1, -10.0, 10.0).unwrap();
        PointSet::from_coords(b, 1.0, xs.to_vec(), Metric::EuclideanFree, 0).unwrap()
    }

    fn field(r: Vec<f64>) -> RangeField {
        RangeField {
            ranges: r,
            truncation_bound: 0.0,
            kmax_used: 1,
        }
    }

    #[test]
    fn two_point_variants() {
        let ps = line(&[0.0, 1.0]);
        let g = build_graph(&ps, &field(vec![1.5, 0.1]), Variant::ReachUnion).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.reach(0), &[1]);
        assert!(g.reach(1).is_empty());
        let h = build_graph(&ps, &field(vec![0.6, 0.5]), Variant::BooleanOverlap).unwrap();
        assert_eq!(h.edges(), &[(0, 1)]);
        let u = build_graph(&ps, &field(vec![0.6, 0.5]), Variant::ReachUnion).unwrap();
        assert!(u.edges().is_empty());
    }

    #[test]
    fn nn_reference_hand_example() {
        let ps = line(&[0.0, 1.0, 3.0]);
        let g = nn_reference_graph(&ps, 1).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        let full = nn_reference_graph(&ps, 2).unwrap();
        assert_eq!(full.edges(), &[(0, 1), (0, 2), (1, 2)]);
        assert!(nn_reference_graph(&ps, 3).is_err());
    }

    #[test]
    fn gn_k_with_unit_weight_is_nn() {
        let b = BoxRegion::cube(2, 0.0, 12.0).unwrap();
        let ps = sample_poisson(&b, 1.0, 77, Metric::EuclideanFree).unwrap();
        let t = knn_table(&ps, 3).unwrap();
        for k in 1..=3 {
            let rf = connection_ranges(&t, &AlphaSpec::gn_k(k, 1.0).unwrap()).unwrap();
            let g = build_graph(&ps, &rf, Variant::ReachUnion).unwrap();
            assert_eq!(g, nn_reference_graph(&ps, k).unwrap());
        }
    }

    #[test]
    fn variant_parse_and_display() {
        for v in [Variant::ReachUnion, Variant::BooleanOverlap] {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("both".parse::<Variant>().is_err());
    }

    #[test]
    fn exports() {
        let ps = line(&[0.0, 1.0, 3.0]);
        let g = nn_reference_graph(&ps, 1).unwrap();
        let mut csv = Vec::new();
        g.write_edge_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "u,v\n0,1\n1,2\n");
        let mut js = Vec::new();
        g.write_adjacency_json(&ps, &AlphaSpec::gn_k(1, 1.0).unwrap(), &mut js)
            .unwrap();
        let v: serde_json::Value = serde_json::from_slice(&js).unwrap();
        assert_eq!(v["variant"], "reach-union");
        assert_eq!(v["adjacency"][1], serde_json::json!([0, 2]));
        assert_eq!(v["reach"][2], serde_json::json!([1]));
    }
}
