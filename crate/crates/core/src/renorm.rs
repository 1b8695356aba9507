//! Renormalisation: coarse-graining continuum configurations into good and
//! bad lattice cells, and the explicit critical-value bounds that follow
//! from comparing with site percolation.
//!
//! Two cell criteria are supported. A *banana* cell of side `3δn` is good
//! when one of its `n^d` sub-boxes of side `3δ` holds exactly one point,
//! lying in the central `δ`-box. A *subsquare* unit cell is good when every
//! one of its `n^d` subsquares holds between 1 and `m / n^d` points.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson as PoissonDist};

use crate::clusters::{CrossingReport, UnionFind};
use crate::error::{Error, Result};
use crate::geometry::{BoxRegion, GridIndex, Metric, PointSet};
use crate::rng::{derive_seed, stream};

/// Rigorous upper bound on the square-lattice site percolation threshold.
pub const PC_SITE_RIGOROUS: f64 = 0.679492;
/// Numerical estimate of the square-lattice site percolation threshold.
pub const PC_SITE_NUMERICAL: f64 = 0.5927;

/// Which value of `p_c^site` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcFlag {
    #[default]
    Rigorous,
    Numerical,
}

impl PcFlag {
    pub fn value(self) -> f64 {
        match self {
            PcFlag::Rigorous => PC_SITE_RIGOROUS,
            PcFlag::Numerical => PC_SITE_NUMERICAL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Criterion {
    Banana {
        delta: f64,
        n: usize,
    },
    Subsquare {
        n: usize,
        m: f64,
    },
    /// Cells good independently with probability `p`.
    Bernoulli {
        p: f64,
    },
}

impl Criterion {
    /// A subsquare criterion with `m / n^d < 1` can never be met.
    pub fn is_vacuous(&self, dim: usize) -> bool {
        match *self {
            Criterion::Subsquare { n, m } => m / (n as f64).powi(dim as i32) < 1.0,
            _ => false,
        }
    }
}

/// A lattice of cells marked good or bad. Cell `(c_0, ..., c_{d-1})` has
/// linear index `Σ c_a · Π_{b<a} dims_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodBoxGrid {
    pub origin: Vec<f64>,
    pub cell_side: f64,
    pub grid_dims: Vec<usize>,
    pub good: Vec<bool>,
    pub criterion: Criterion,
}

impl GoodBoxGrid {
    pub fn dim(&self) -> usize {
        self.grid_dims.len()
    }

    pub fn len(&self) -> usize {
        self.good.len()
    }

    pub fn is_empty(&self) -> bool {
        self.good.is_empty()
    }

    pub fn good_count(&self) -> usize {
        self.good.iter().filter(|&&g| g).count()
    }

    pub fn good_fraction(&self) -> f64 {
        if self.good.is_empty() {
            return 0.0;
        }
        self.good_count() as f64 / self.good.len() as f64
    }

    pub fn region(&self) -> Result<BoxRegion> {
        BoxRegion::new(
            self.origin.clone(),
            self.origin
                .iter()
                .zip(&self.grid_dims)
                .map(|(o, &k)| o + k as f64 * self.cell_side)
                .collect(),
        )
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dim()];
        for a in 1..self.dim() {
            s[a] = s[a - 1] * self.grid_dims[a - 1];
        }
        s
    }

    /// Lattice coordinates of cell `i`.
    pub fn cell_coords(&self, mut i: usize) -> Vec<usize> {
        self.grid_dims
            .iter()
            .map(|&k| {
                let c = i % k;
                i /= k;
                c
            })
            .collect()
    }

    /// Independent Bernoulli(`p`) cells.
    pub fn bernoulli(grid_dims: Vec<usize>, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::domain(
                "GoodBoxGrid::bernoulli",
                format!("p must lie in [0, 1], got {p}"),
            ));
        }
        check_dims(&grid_dims)?;
        let total: usize = grid_dims.iter().product();
        let mut rng = stream(seed, 0);
        let good = (0..total).map(|_| rng.random::<f64>() < p).collect();
        Ok(GoodBoxGrid {
            origin: vec![0.0; grid_dims.len()],
            cell_side: 1.0,
            grid_dims,
            good,
            criterion: Criterion::Bernoulli { p },
        })
    }

    /// Plain PBM (`P1`) raster of a 2D grid, `1` for good cells, top row
    /// at the highest `y`.
    pub fn write_pbm<W: Write>(&self, mut w: W) -> Result<()> {
        if self.dim() != 2 {
            return Err(Error::Unsupported("raster export needs a 2D grid".into()));
        }
        let (nx, ny) = (self.grid_dims[0], self.grid_dims[1]);
        writeln!(w, "P1")?;
        writeln!(w, "{nx} {ny}")?;
        for y in (0..ny).rev() {
            let row: Vec<&str> = (0..nx)
                .map(|x| if self.good[x + y * nx] { "1" } else { "0" })
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    /// CSV with columns `c0, ..., c{d-1}, good`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header: Vec<String> = (0..self.dim()).map(|a| format!("c{a}")).collect();
        header.push("good".into());
        writeln!(w, "{}", header.join(","))?;
        for (i, g) in self.good.iter().enumerate() {
            let c: Vec<String> = self.cell_coords(i).iter().map(|c| c.to_string()).collect();
            writeln!(w, "{},{}", c.join(","), u8::from(*g))?;
        }
        Ok(())
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::domain(
            "GoodBoxGrid",
            "grid needs at least one cell per axis",
        ));
    }
    Ok(())
}

/// Number of cells of side `side` tiling `region` along each axis.
fn tiling(op: &'static str, region: &BoxRegion, side: f64) -> Result<Vec<usize>> {
    (0..region.dim())
        .map(|a| {
            let q = region.side(a) / side;
            let k = q.round();
            if k < 1.0 || (q - k).abs() > 1e-9 * q.max(1.0) {
                Err(Error::domain(
                    op,
                    format!(
                        "region side {} is not a multiple of cell side {side}",
                        region.side(a)
                    ),
                ))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

fn sub_index(p: &[f64], lower: &[f64], side: f64, dims: &[usize]) -> (usize, Vec<f64>) {
    let mut lin = 0;
    let mut stride = 1;
    let mut offsets = Vec::with_capacity(p.len());
    for a in 0..p.len() {
        let c = (((p[a] - lower[a]) / side).floor().max(0.0) as usize).min(dims[a] - 1);
        offsets.push(p[a] - lower[a] - c as f64 * side);
        lin += c * stride;
        stride *= dims[a];
    }
    (lin, offsets)
}

/// Map every fine sub-box of a region to the coarse cell containing it.
fn coarse_of(fine: usize, fine_dims: &[usize], n: usize) -> usize {
    let mut rest = fine;
    let mut lin = 0;
    let mut stride = 1;
    for &k in fine_dims {
        let c = rest % k;
        rest /= k;
        lin += (c / n) * stride;
        stride *= k / n;
    }
    lin
}

/// Mark each `3δn` cell of `region` good iff it contains a `δ`-banana box.
pub fn banana_scan(
    points: &PointSet,
    delta: f64,
    n: usize,
    region: &BoxRegion,
) -> Result<GoodBoxGrid> {
    if !(delta > 0.0) || n == 0 {
        return Err(Error::domain("banana_scan", "need delta > 0 and n >= 1"));
    }
    if region.dim() != points.dim() {
        return Err(Error::InvalidBox(
            "region dimension differs from the point set".into(),
        ));
    }
    let cell = 3.0 * delta * n as f64;
    let grid_dims = tiling("banana_scan", region, cell)?;
    let fine_dims: Vec<usize> = grid_dims.iter().map(|k| k * n).collect();
    let total_fine: usize = fine_dims.iter().product();
    let mut count = vec![0u32; total_fine];
    let mut central = vec![0u32; total_fine];
    let sub = 3.0 * delta;
    for p in points.iter().filter(|p| region.contains(p)) {
        let (i, off) = sub_index(p, region.lower(), sub, &fine_dims);
        count[i] += 1;
        if off.iter().all(|&o| o >= delta && o < 2.0 * delta) {
            central[i] += 1;
        }
    }
    let mut good = vec![false; grid_dims.iter().product()];
    for f in 0..total_fine {
        if count[f] == 1 && central[f] == 1 {
            good[coarse_of(f, &fine_dims, n)] = true;
        }
    }
    Ok(GoodBoxGrid {
        origin: region.lower().to_vec(),
        cell_side: cell,
        grid_dims,
        good,
        criterion: Criterion::Banana { delta, n },
    })
}

/// Count `δ`-banana boxes among `boxes` independent `3δ` boxes in the plane,
/// sampled in strips of at most 1000 boxes.
pub fn banana_frequency(delta: f64, boxes: u64, density: f64, seed: u64) -> Result<(u64, u64)> {
    const STRIP: u64 = 1000;
    let strips = boxes.div_ceil(STRIP);
    let counts: Vec<u64> = (0..strips)
        .into_par_iter()
        .map(|s| {
            let len = STRIP.min(boxes - s * STRIP);
            let side = 3.0 * delta;
            let region = BoxRegion::new(vec![0.0, 0.0], vec![side * len as f64, side])?;
            let ps = crate::geometry::sample_poisson(
                &region,
                density,
                derive_seed(seed, s),
                Metric::EuclideanFree,
            )?;
            Ok(banana_scan(&ps, delta, 1, &region)?.good_count() as u64)
        })
        .collect::<Result<_>>()?;
    Ok((counts.iter().sum(), boxes))
}

/// Probability that a `3δ` box is a `δ`-banana box at unit density in `d`
/// dimensions: `δ^d e^{-(3δ)^d}`.
pub fn banana_prob(delta: f64, dim: usize) -> f64 {
    let v = delta.powi(dim as i32);
    v * (-(3.0f64.powi(dim as i32)) * v).exp()
}

/// `1 - (1 - δ²e^{-9δ²})^{n²}`: probability that a `3δn` box is good.
pub fn good_box_prob(delta: f64, n: usize) -> f64 {
    good_box_prob_d(delta, n, 2)
}

/// The `d`-dimensional extension `1 - (1 - δ^d e^{-3^d δ^d})^{n^d}`.
pub fn good_box_prob_d(delta: f64, n: usize, dim: usize) -> f64 {
    let q = 1.0 - banana_prob(delta, dim);
    1.0 - q.powf((n as f64).powi(dim as i32))
}

/// Smallest `n` with `good_box_prob(1/3, n) >= pc`:
/// `ceil(sqrt(ln(1 - pc) / ln(1 - 1/(9e))))`, at least 1.
pub fn n_tilde(pc: f64) -> Result<usize> {
    if !(pc > 0.0 && pc < 1.0) {
        return Err(Error::domain(
            "n_tilde",
            format!("pc must lie in (0, 1), got {pc}"),
        ));
    }
    let q = 1.0 - 1.0 / (9.0 * std::f64::consts::E);
    Ok(((1.0 - pc).ln() / q.ln()).sqrt().ceil().max(1.0) as usize)
}

/// `ñ(pc)·√45`, the upper bound on `α_c(2)`.
pub fn alpha_bound_2d(pc: f64) -> Result<f64> {
    Ok(n_tilde(pc)? as f64 * 45f64.sqrt())
}

/// Largest distance between points of two neighbouring `3δn` boxes:
/// `3δn√5`.
pub fn neighbour_box_diameter(delta: f64, n: usize) -> f64 {
    3.0 * delta * n as f64 * 5f64.sqrt()
}

/// Range multiplier above which a banana point (nearest neighbour at least
/// `δ` away) reaches every point of the neighbouring box:
/// `3δn√5 / δ = n√45`, independent of `δ`.
pub fn banana_alpha_threshold(delta: f64, n: usize) -> f64 {
    neighbour_box_diameter(delta, n) / delta
}

/// Mark each unit cell of `region` good iff all its `n^d` subsquares hold
/// between 1 and `m / n^d` points. `n` must be odd.
pub fn subsquare_good_scan(
    points: &PointSet,
    n: usize,
    m: f64,
    region: &BoxRegion,
) -> Result<GoodBoxGrid> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::domain(
            "subsquare_good_scan",
            format!("n must be odd, got {n}"),
        ));
    }
    if region.dim() != points.dim() {
        return Err(Error::InvalidBox(
            "region dimension differs from the point set".into(),
        ));
    }
    let dim = region.dim();
    let grid_dims = tiling("subsquare_good_scan", region, 1.0)?;
    let fine_dims: Vec<usize> = grid_dims.iter().map(|k| k * n).collect();
    let mut count = vec![0u64; fine_dims.iter().product()];
    for p in points.iter().filter(|p| region.contains(p)) {
        count[sub_index(p, region.lower(), 1.0 / n as f64, &fine_dims).0] += 1;
    }
    let cap = m / (n as f64).powi(dim as i32);
    let mut good = vec![true; grid_dims.iter().product()];
    for (f, &c) in count.iter().enumerate() {
        if c == 0 || c as f64 > cap {
            good[coarse_of(f, &fine_dims, n)] = false;
        }
    }
    Ok(GoodBoxGrid {
        origin: region.lower().to_vec(),
        cell_side: 1.0,
        grid_dims,
        good,
        criterion: Criterion::Subsquare { n, m },
    })
}

/// Subsquare goodness sampled at the level of counts: each of the `n^d`
/// subsquares of a unit cell holds an independent Poisson(`λ/n^d`) number
/// of points, which is all the criterion depends on.
pub fn subsquare_good_grid_sampled(
    n: usize,
    m: f64,
    density: f64,
    grid_dims: Vec<usize>,
    seed: u64,
) -> Result<GoodBoxGrid> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::domain(
            "subsquare_good_grid_sampled",
            format!("n must be odd, got {n}"),
        ));
    }
    check_dims(&grid_dims)?;
    let dim = grid_dims.len();
    let subs = n.pow(dim as u32);
    let mean = density / subs as f64;
    let pois = Poisson::new(mean)
        .map_err(|e| Error::domain("subsquare_good_grid_sampled", e.to_string()))?;
    let cap = m / subs as f64;
    let total: usize = grid_dims.iter().product();
    let good = (0..total)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c as u64);
            (0..subs).all(|_| {
                let x: f64 = pois.sample(&mut rng);
                x >= 1.0 && x <= cap
            })
        })
        .collect();
    Ok(GoodBoxGrid {
        origin: vec![0.0; dim],
        cell_side: 1.0,
        grid_dims,
        good,
        criterion: Criterion::Subsquare { n, m },
    })
}

/// Parameters satisfying the two displayed conditions
/// `P(X_n = 0) < (1-p_c)/(2n²)` and `P(X_n > m/n²) < (1-p_c)/(2n²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsquareParams {
    pub alpha: f64,
    pub pc: f64,
    /// Smallest odd `n > 1 + 2√5/α`.
    pub n: usize,
    /// Mean count per subsquare, `λ / n²`.
    pub mu: f64,
    pub density: f64,
    /// Per-subsquare count cap, `m / n²`.
    pub t: u64,
    pub m: f64,
    /// `k >= m + 1` makes every corridor point's range at least `α(n-1)/(2n)`.
    pub k: usize,
    /// Union lower bound `1 - n²·(P(X_n = 0) + P(X_n > t))` on the good
    /// probability.
    pub good_prob_lower: f64,
}

pub fn choose_subsquare_params(alpha: f64, pc: f64) -> Result<SubsquareParams> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(
            "choose_subsquare_params",
            format!("alpha must be > 0, got {alpha}"),
        ));
    }
    if !(pc > 0.0 && pc < 1.0) {
        return Err(Error::domain(
            "choose_subsquare_params",
            format!("pc must lie in (0, 1), got {pc}"),
        ));
    }
    let mut n = (1.0 + 2.0 * 5f64.sqrt() / alpha).floor() as usize + 1;
    if n.is_multiple_of(2) {
        n += 1;
    }
    let n2 = (n * n) as f64;
    let eps = (1.0 - pc) / (2.0 * n2);
    let mu = (1.0 / eps).ln() + 0.1;
    let dist = PoissonDist::new(mu)
        .map_err(|e| Error::domain("choose_subsquare_params", e.to_string()))?;
    let mut t = mu.ceil() as u64;
    while dist.sf(t) >= eps {
        t += 1;
    }
    let m = t as f64 * n2;
    let good_prob_lower = 1.0 - n2 * ((-mu).exp() + dist.sf(t));
    Ok(SubsquareParams {
        alpha,
        pc,
        n,
        mu,
        density: mu * n2,
        t,
        m,
        k: m as usize + 1,
        good_prob_lower,
    })
}

/// Connectivity of the central corridor `B_0, ..., B_n` running from the
/// middle subsquare of one unit square to the middle subsquare of its right
/// neighbour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorReport {
    pub points_per_subsquare: Vec<usize>,
    /// Smallest certified range `α·min(d_k, (n-1)/(2n))` over corridor points.
    pub min_certified_range: f64,
    /// Largest distance between points of consecutive subsquares.
    pub max_neighbour_distance: f64,
    /// Every pair in consecutive subsquares is joined by a reach edge.
    pub all_adjacent_pairs_connected: bool,
}

impl CorridorReport {
    pub fn connected(&self) -> bool {
        self.all_adjacent_pairs_connected && self.points_per_subsquare.iter().all(|&c| c > 0)
    }
}

/// Check the corridor between the unit squares with lower-left corners
/// `corner` and `corner + e_0` in a GN_k(2, α) graph.
///
/// Ranges are certified rather than computed: when fewer than `k` other
/// points lie within `R = (n-1)/(2n)` of a corridor point, its true `d_k`
/// is at least `R` whatever lies outside the sample (the `R`-ball stays
/// inside the two squares); otherwise `d_k` is found exactly inside the
/// ball.
pub fn verify_corridor(
    points: &PointSet,
    corner: [f64; 2],
    n: usize,
    k: usize,
    alpha: f64,
) -> Result<CorridorReport> {
    if points.dim() != 2 {
        return Err(Error::domain("verify_corridor", "needs a 2D point set"));
    }
    if n == 0 || n.is_multiple_of(2) || k == 0 {
        return Err(Error::domain("verify_corridor", "need odd n and k >= 1"));
    }
    let nf = n as f64;
    let radius = (nf - 1.0) / (2.0 * nf);
    let x0 = corner[0] + radius;
    let (y0, y1) = (corner[1] + radius, corner[1] + (nf + 1.0) / (2.0 * nf));
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for (j, p) in points.iter().enumerate() {
        if p[1] < y0 || p[1] > y1 || p[0] < x0 {
            continue;
        }
        let i = ((p[0] - x0) * nf).floor() as usize;
        if i <= n {
            members[i].push(j);
        }
    }
    let grid = GridIndex::new(points);
    let mut certified = std::collections::HashMap::new();
    for &j in members.iter().flatten() {
        let mut within = 0usize;
        grid.for_each_within(points.point(j), radius, |y, _| {
            if y != j {
                within += 1;
            }
        });
        let dk = if within >= k {
            grid.knn(j, k)[k - 1].0
        } else {
            radius
        };
        certified.insert(j, alpha * dk.min(radius));
    }
    let mut max_d: f64 = 0.0;
    let mut all = true;
    for w in members.windows(2) {
        for &a in &w[0] {
            for &b in &w[1] {
                let d = points.distance(a, b);
                max_d = max_d.max(d);
                if d > certified[&a].max(certified[&b]) {
                    all = false;
                }
            }
        }
    }
    Ok(CorridorReport {
        points_per_subsquare: members.iter().map(Vec::len).collect(),
        min_certified_range: certified.values().copied().fold(f64::INFINITY, f64::min),
        max_neighbour_distance: max_d,
        all_adjacent_pairs_connected: all,
    })
}

/// Nearest-neighbour site percolation on the good cells: crossing between
/// the two faces normal to `axis`.
pub fn grid_site_percolation(grid: &GoodBoxGrid, axis: usize) -> Result<CrossingReport> {
    let dim = grid.dim();
    if axis >= dim {
        return Err(Error::domain(
            "grid_site_percolation",
            format!("axis {axis} out of range"),
        ));
    }
    let strides = grid.strides();
    let mut uf = UnionFind::new(grid.len());
    for i in 0..grid.len() {
        if !grid.good[i] {
            continue;
        }
        let c = grid.cell_coords(i);
        for a in 0..dim {
            if c[a] + 1 < grid.grid_dims[a] && grid.good[i + strides[a]] {
                uf.union(i, i + strides[a]);
            }
        }
    }
    let last = grid.grid_dims[axis] - 1;
    let mut low = std::collections::BTreeMap::new();
    let mut high = std::collections::BTreeSet::new();
    for i in 0..grid.len() {
        if !grid.good[i] {
            continue;
        }
        let c = grid.cell_coords(i)[axis];
        let root = uf.find(i);
        if c == 0 {
            low.entry(root).or_insert(i);
        }
        if c == last {
            high.insert(root);
        }
    }
    let crossing_component = low
        .iter()
        .filter(|(r, _)| high.contains(*r))
        .map(|(_, &i)| i)
        .min();
    Ok(CrossingReport {
        axis,
        inner_box: grid.region()?,
        crossing: crossing_component.is_some(),
        crossing_component,
    })
}
