//! Generalised nearest-neighbour (GN) continuum percolation.
//!
//! Each point `x` of a homogeneous Poisson process is given a connection
//! range `r(x) = Σ αᵢ dᵢ(x)`, where `dᵢ(x)` is the distance to its `i`-th
//! nearest neighbour, and reaches every point within that range. This crate
//! samples the point processes, builds the resulting graphs, detects
//! finite-window percolation, estimates critical values by Monte Carlo, and
//! evaluates the closed-form quantities attached to the model (gap bridging
//! in one dimension, renormalisation bounds, the high-dimensional branching
//! construction).
//!
//! Module map:
//!
//! - [`geometry`]: windows, Poisson sampling, metrics, grid index, exact kNN.
//! - [`gnmodel`]: weight vectors, connection ranges, graph construction.
//! - [`clusters`]: union-find components, crossing detection, out-clusters.
//! - [`oned`]: gaps, bridges and the one-dimensional estimators.
//! - [`renorm`]: banana-box and subsquare renormalisation.
//! - [`sbp`]: spatial branching process and its planar projection.
//! - [`mc`]: trial engine, Wilson intervals, crossing curves, bisection.
//! - [`cli`]: command-line front end.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod clusters;
pub mod error;
pub mod geometry;
pub mod gnmodel;
pub mod mc;
pub mod oned;
pub mod renorm;
pub mod rng;
pub mod sbp;
pub mod stats;

pub use error::{Error, Result};

/// Version string embedded in every machine-readable output.
pub const VERSION: &str = concat!("gnperc ", env!("CARGO_PKG_VERSION"));
