//! Windows, Poisson sampling, metrics and exact nearest-neighbour tables.

mod grid;
pub mod io;
mod knn;

pub use grid::GridIndex;
pub use knn::{knn_table, NeighborTable};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng;

/// Axis-aligned box `[lower, upper]` in `dim` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidBox(format!(
                "lower has {} coordinates, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && u > l) {
                return Err(Error::InvalidBox(format!(
                    "axis {i}: need finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        Ok(BoxRegion { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (l, u))| *x >= *l && *x <= *u)
    }

    /// True when `other` lies inside `self`.
    pub fn contains_box(&self, other: &BoxRegion) -> bool {
        other.dim() == self.dim() && self.contains(&other.lower) && self.contains(&other.upper)
    }

    /// Box grown by `margin` on every face.
    pub fn inflate(&self, margin: f64) -> Result<Self> {
        Self::new(
            self.lower.iter().map(|l| l - margin).collect(),
            self.upper.iter().map(|u| u + margin).collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.lower.iter().map(|l| l * s).collect(),
            self.upper.iter().map(|u| u * s).collect(),
        )
    }

    /// Distance from `p` to the nearest face.
    pub fn distance_to_boundary(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (l, u))| (x - l).min(u - x))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Plain Euclidean distance; the window boundary is a hard edge.
    #[default]
    EuclideanFree,
    /// Euclidean distance with periodic wrapping on every axis.
    Torus,
}

/// Euclidean or wrapped distance between two points of `bbox`.
pub fn pair_distance(p: &[f64], q: &[f64], bbox: &BoxRegion, metric: Metric) -> f64 {
    match metric {
        Metric::EuclideanFree => p
            .iter()
            .zip(q)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
        Metric::Torus => p
            .iter()
            .zip(q)
            .enumerate()
            .map(|(i, (a, b))| {
                let period = bbox.side(i);
                let d = (a - b).abs();
                let d = d.min(period - d);
                d * d
            })
            .sum::<f64>()
            .sqrt(),
    }
}

/// Volume `c(d) = π^{d/2} / Γ(d/2 + 1)` of the unit ball in `d` dimensions.
///
/// Underflows to zero beyond roughly `d = 1000`; use
/// [`ln_unit_ball_volume`] there.
pub fn unit_ball_volume(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::domain("unit_ball_volume", "dimension must be >= 1"));
    }
    if d <= 300 {
        // V(d) = V(d-2) * 2π/d keeps full precision for moderate d.
        let mut v = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
        let mut k = if d.is_multiple_of(2) { 2 } else { 3 };
        while k <= d {
            v *= 2.0 * std::f64::consts::PI / k as f64;
            k += 2;
        }
        Ok(v)
    } else {
        Ok(ln_unit_ball_volume(d)?.exp())
    }
}

pub fn ln_unit_ball_volume(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::domain(
            "ln_unit_ball_volume",
            "dimension must be >= 1",
        ));
    }
    let h = d as f64 / 2.0;
    Ok(h * std::f64::consts::PI.ln() - ln_gamma(h + 1.0))
}

/// Default edge margin `3 (k / (λ c(d)))^{1/d}`: covers the `k`-NN search
/// radius of a typical point with high probability.
pub fn default_margin(k_eff: usize, density: f64, dim: usize) -> Result<f64> {
    let c = unit_ball_volume(dim)?;
    Ok(3.0 * (k_eff.max(1) as f64 / (density * c)).powf(1.0 / dim as f64))
}

/// A finite-window realisation of a homogeneous Poisson process.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    density: f64,
    bbox: BoxRegion,
    coords: Vec<f64>,
    metric: Metric,
    seed: u64,
}

/// Points per independently seeded block during sampling.
const SAMPLE_BLOCK: usize = 4096;
/// Stream reserved for the point count.
const COUNT_STREAM: u64 = u64::MAX;

impl PointSet {
    /// Wrap explicit coordinates (flat, `dim` per point).
    pub fn from_coords(
        bbox: BoxRegion,
        density: f64,
        coords: Vec<f64>,
        metric: Metric,
        seed: u64,
    ) -> Result<Self> {
        let dim = bbox.dim();
        if !(density > 0.0 && density.is_finite()) {
            return Err(Error::domain(
                "PointSet",
                format!("density must be > 0, got {density}"),
            ));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::domain(
                "PointSet",
                format!(
                    "{} coordinates is not a multiple of dim {dim}",
                    coords.len()
                ),
            ));
        }
        if let Some(i) = coords.chunks(dim).position(|p| !bbox.contains(p)) {
            return Err(Error::domain(
                "PointSet",
                format!("point {i} lies outside the box"),
            ));
        }
        Ok(PointSet {
            dim,
            density,
            bbox,
            coords,
            metric,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    pub fn bbox(&self) -> &BoxRegion {
        &self.bbox
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::Chunks<'_, f64> {
        self.coords.chunks(self.dim)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        pair_distance(self.point(i), self.point(j), &self.bbox, self.metric)
    }

    /// Points whose distance to the window boundary is at least `margin`.
    /// Under the torus metric every point is interior.
    pub fn interior_mask(&self, margin: f64) -> Vec<bool> {
        match self.metric {
            Metric::Torus => vec![true; self.len()],
            Metric::EuclideanFree => self
                .iter()
                .map(|p| self.bbox.distance_to_boundary(p) >= margin)
                .collect(),
        }
    }

    /// Copy with every coordinate and the box multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::domain("PointSet::scaled", "scale must be > 0"));
        }
        let density = self.density / s.powi(self.dim as i32);
        Ok(PointSet {
            dim: self.dim,
            density,
            bbox: self.bbox.scaled(s)?,
            coords: self.coords.iter().map(|x| x * s).collect(),
            metric: self.metric,
            seed: self.seed,
        })
    }

    /// One-dimensional set reordered by coordinate.
    pub fn sorted_1d(&self) -> Result<Self> {
        if self.dim != 1 {
            return Err(Error::domain(
                "PointSet::sorted_1d",
                "needs a one-dimensional set",
            ));
        }
        let mut coords = self.coords.clone();
        coords.sort_by(f64::total_cmp);
        Ok(PointSet {
            coords,
            ..self.clone()
        })
    }

    /// Subset of the points satisfying `keep`, preserving order.
    pub fn filter<F: Fn(&[f64]) -> bool>(&self, keep: F) -> Self {
        let coords = self
            .iter()
            .filter(|p| keep(p))
            .flat_map(|p| p.iter().copied())
            .collect();
        PointSet {
            coords,
            ..self.clone()
        }
    }
}

/// Homogeneous Poisson process of intensity `density` on `bbox`.
///
/// The count is Poisson(λ·volume) and coordinates are i.i.d. uniform. Point
/// `i` is drawn from stream `i / 4096` of the seeded generator, so the result
/// depends only on `(seed, bbox, density)` and not on thread scheduling.
pub fn sample_poisson(
    bbox: &BoxRegion,
    density: f64,
    seed: u64,
    metric: Metric,
) -> Result<PointSet> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(Error::domain(
            "sample_poisson",
            format!("density must be > 0, got {density}"),
        ));
    }
    let dim = bbox.dim();
    let mean = density * bbox.volume();
    let n = if mean > 0.0 {
        let pois = Poisson::new(mean)
            .map_err(|e| Error::domain("sample_poisson", format!("mean {mean}: {e}")))?;
        pois.sample(&mut rng::stream(seed, COUNT_STREAM)) as usize
    } else {
        0
    };
    let mut coords = vec![0.0; n * dim];
    coords
        .par_chunks_mut(SAMPLE_BLOCK * dim)
        .enumerate()
        .for_each(|(block, chunk)| {
            let mut r = rng::stream(seed, block as u64);
            for p in chunk.chunks_mut(dim) {
                for (a, x) in p.iter_mut().enumerate() {
                    let u: f64 = r.random();
                    *x = bbox.lower[a] + u * bbox.side(a);
                }
            }
        });
    Ok(PointSet {
        dim,
        density,
        bbox: bbox.clone(),
        coords,
        metric,
        seed,
    })
}
