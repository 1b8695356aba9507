use super::{Metric, PointSet};

/// Uniform cell index over a [`PointSet`].
///
/// Cells tile the window exactly; the nominal side is `(1/λ)^{1/d}` so a
/// cell holds about one point. Supports exact k-nearest-neighbour queries by
/// expanding Chebyshev shells and fixed-radius queries, both honouring the
/// point set's metric.
#[derive(Debug, Clone)]
pub struct GridIndex<'a> {
    points: &'a PointSet,
    width: Vec<f64>,
    ncells: Vec<usize>,
    strides: Vec<usize>,
    cell_start: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> GridIndex<'a> {
    pub fn new(points: &'a PointSet) -> Self {
        let side = (1.0 / points.density()).powf(1.0 / points.dim() as f64);
        Self::with_cell_side(points, side)
    }

    pub fn with_cell_side(points: &'a PointSet, target: f64) -> Self {
        let dim = points.dim();
        let bbox = points.bbox();
        let cap = (4 * points.len()).max(64) as f64;
        let mut target = target.max(f64::MIN_POSITIVE);
        let mut ncells: Vec<usize>;
        loop {
            ncells = (0..dim)
                .map(|a| ((bbox.side(a) / target).floor() as usize).clamp(1, 1 << 24))
                .collect();
            let total: f64 = ncells.iter().map(|&n| n as f64).product();
            if total <= cap {
                break;
            }
            target *= (total / cap).powf(1.0 / dim as f64) * 1.01;
        }
        let width: Vec<f64> = (0..dim).map(|a| bbox.side(a) / ncells[a] as f64).collect();
        let mut strides = vec![1usize; dim];
        for a in 1..dim {
            strides[a] = strides[a - 1] * ncells[a - 1];
        }
        let total: usize = ncells.iter().product();

        let mut grid = GridIndex {
            points,
            width,
            ncells,
            strides,
            cell_start: Vec::new(),
            order: Vec::new(),
        };
        let cell_of: Vec<usize> = points
            .iter()
            .map(|p| grid.linear(&grid.cell_coords(p)))
            .collect();
        let mut counts = vec![0usize; total + 1];
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for c in 0..total {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut order = vec![0usize; points.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            order[fill[c]] = i;
            fill[c] += 1;
        }
        grid.cell_start = counts;
        grid.order = order;
        grid
    }

    pub fn points(&self) -> &'a PointSet {
        self.points
    }

    pub fn cell_count(&self) -> usize {
        self.cell_start.len() - 1
    }

    fn torus(&self) -> bool {
        self.points.metric() == Metric::Torus
    }

    fn cell_coords(&self, p: &[f64]) -> Vec<usize> {
        let lower = self.points.bbox().lower();
        p.iter()
            .enumerate()
            .map(|(a, x)| {
                let c = ((x - lower[a]) / self.width[a]).floor();
                (c.max(0.0) as usize).min(self.ncells[a] - 1)
            })
            .collect()
    }

    fn linear(&self, c: &[usize]) -> usize {
        c.iter().zip(&self.strides).map(|(c, s)| c * s).sum()
    }

    fn cell_points(&self, cell: usize) -> &[usize] {
        &self.order[self.cell_start[cell]..self.cell_start[cell + 1]]
    }

    /// Offset range `[lo, hi]` reachable along `axis` from cell `c` within
    /// `reach` cells, without visiting any cell twice.
    fn offset_range(&self, axis: usize, c: usize, reach: usize) -> (isize, isize) {
        let n = self.ncells[axis];
        if self.torus() {
            let a = (n - 1) / 2;
            let b = n - 1 - a;
            (-(reach.min(a) as isize), reach.min(b) as isize)
        } else {
            (-(reach.min(c) as isize), reach.min(n - 1 - c) as isize)
        }
    }

    /// Visit every cell whose offset from `center` lies in the per-axis
    /// ranges; with `shell = Some(s)` only offsets of Chebyshev norm `s`.
    fn visit_cells<F: FnMut(usize)>(
        &self,
        center: &[usize],
        ranges: &[(isize, isize)],
        shell: Option<isize>,
        mut f: F,
    ) {
        let dim = center.len();
        if ranges.iter().any(|(lo, hi)| lo > hi) {
            return;
        }
        let mut off: Vec<isize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let on_shell = match shell {
                Some(s) => off.iter().any(|o| o.abs() == s),
                None => true,
            };
            if on_shell {
                let mut lin = 0usize;
                for a in 0..dim {
                    let n = self.ncells[a] as isize;
                    let c = (center[a] as isize + off[a]).rem_euclid(n) as usize;
                    lin += c * self.strides[a];
                }
                f(lin);
            }
            // odometer
            let mut a = 0;
            loop {
                if a == dim {
                    return;
                }
                if off[a] < ranges[a].1 {
                    off[a] += 1;
                    break;
                }
                off[a] = ranges[a].0;
                a += 1;
            }
        }
    }

    /// The `k` nearest points to `q` (excluding index `exclude`), sorted by
    /// distance then index. Exact: the search stops only once the `k`-th
    /// distance is strictly below the distance to every unsearched cell.
    pub fn knn_point(&self, q: &[f64], exclude: Option<usize>, k: usize) -> Vec<(f64, usize)> {
        let pts = self.points;
        let bbox = pts.bbox();
        let lower = bbox.lower();
        let center = self.cell_coords(q);
        let dim = center.len();
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 16);
        if k == 0 {
            return best;
        }
        let mut s = 0usize;
        loop {
            let ranges: Vec<(isize, isize)> = (0..dim)
                .map(|a| self.offset_range(a, center[a], s))
                .collect();
            self.visit_cells(&center, &ranges, Some(s as isize), |cell| {
                for &j in self.cell_points(cell) {
                    if Some(j) == exclude {
                        continue;
                    }
                    let d = super::pair_distance(q, pts.point(j), bbox, pts.metric());
                    best.push((d, j));
                }
            });
            if best.len() > k {
                best.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                best.truncate(k);
            }

            let mut covered = true;
            let mut bound = f64::INFINITY;
            for a in 0..dim {
                let (lo, hi) = ranges[a];
                let n = self.ncells[a] as isize;
                let c = center[a] as isize;
                let full = if self.torus() {
                    hi - lo + 1 >= n
                } else {
                    c + lo == 0 && c + hi == n - 1
                };
                if full {
                    continue;
                }
                covered = false;
                let left = lower[a] + (c + lo) as f64 * self.width[a];
                let right = lower[a] + (c + hi + 1) as f64 * self.width[a];
                if self.torus() || c + lo > 0 {
                    bound = bound.min(q[a] - left);
                }
                if self.torus() || c + hi < n - 1 {
                    bound = bound.min(right - q[a]);
                }
            }
            if covered {
                break;
            }
            if best.len() == k {
                let kth = best.iter().map(|b| b.0).fold(f64::NEG_INFINITY, f64::max);
                if kth < bound {
                    break;
                }
            }
            s += 1;
        }
        best.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        best.truncate(k);
        best
    }

    /// The `k` nearest neighbours of point `i`.
    pub fn knn(&self, i: usize, k: usize) -> Vec<(f64, usize)> {
        self.knn_point(self.points.point(i), Some(i), k)
    }

    /// Call `f(j, dist)` for every point `j` with `dist(q, j) <= radius`.
    pub fn for_each_within<F: FnMut(usize, f64)>(&self, q: &[f64], radius: f64, mut f: F) {
        let pts = self.points;
        let center = self.cell_coords(q);
        let ranges: Vec<(isize, isize)> = (0..center.len())
            .map(|a| {
                let reach = if radius.is_finite() {
                    (radius / self.width[a]).ceil().min(1e9) as usize + 1
                } else {
                    usize::MAX / 4
                };
                self.offset_range(a, center[a], reach)
            })
            .collect();
        self.visit_cells(&center, &ranges, None, |cell| {
            for &j in self.cell_points(cell) {
                let d = super::pair_distance(q, pts.point(j), pts.bbox(), pts.metric());
                if d <= radius {
                    f(j, d);
                }
            }
        });
    }
}
