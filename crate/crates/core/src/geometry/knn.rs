use rayon::prelude::*;

use super::{GridIndex, PointSet};
use crate::error::{Error, Result};

/// Per-point sorted nearest-neighbour distances `d_1(x) <= d_2(x) <= ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    requested: usize,
    cols: usize,
    dim: usize,
    density: f64,
    distances: Vec<f64>,
    indices: Vec<usize>,
}

impl NeighborTable {
    /// The `kmax` that was asked for.
    pub fn kmax(&self) -> usize {
        self.requested
    }

    /// Columns actually present: `min(kmax, n - 1)`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Set when `kmax >= n` forced fewer columns than requested. Callers
    /// must check this before building connection ranges.
    pub fn truncated(&self) -> bool {
        self.cols < self.requested
    }

    pub fn len(&self) -> usize {
        self.distances.len().checked_div(self.cols).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    /// Sorted neighbour distances of point `i`.
    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.cols..(i + 1) * self.cols]
    }

    pub fn indices(&self, i: usize) -> &[usize] {
        &self.indices[i * self.cols..(i + 1) * self.cols]
    }

    /// `d_k(x_i)` for `k >= 1`.
    pub fn d(&self, i: usize, k: usize) -> f64 {
        self.distances(i)[k - 1]
    }
}

/// Exact k-nearest-neighbour table, computed with a [`GridIndex`].
pub fn knn_table(points: &PointSet, kmax: usize) -> Result<NeighborTable> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientPoints {
            points: n,
            required: 2,
        });
    }
    if kmax == 0 {
        return Err(Error::domain("knn_table", "kmax must be >= 1"));
    }
    let cols = kmax.min(n - 1);
    let grid = GridIndex::new(points);
    let mut distances = vec![0.0; n * cols];
    let mut indices = vec![0usize; n * cols];
    distances
        .par_chunks_mut(cols)
        .zip(indices.par_chunks_mut(cols))
        .enumerate()
        .for_each(|(i, (dr, ir))| {
            for (c, (d, j)) in grid.knn(i, cols).into_iter().enumerate() {
                dr[c] = d;
                ir[c] = j;
            }
        });
    Ok(NeighborTable {
        requested: kmax,
        cols,
        dim: points.dim(),
        density: points.density(),
        distances,
        indices,
    })
}
