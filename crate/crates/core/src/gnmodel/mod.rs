//! The GN connection rule: weight vectors, connection ranges, graphs and
//! the closed-form range oracles.

mod alpha;
mod graph;

pub use alpha::{hurwitz_zeta, AlphaSpec, Moment, Tail};
pub use graph::{build_graph, nn_reference_graph, GNGraph, Variant};

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::{unit_ball_volume, NeighborTable};

/// Connection ranges `r(x)` for every point of a realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeField {
    pub ranges: Vec<f64>,
    /// Upper bound on the expected contribution of the omitted terms
    /// `i > kmax_used` to a typical `r(x)`.
    pub truncation_bound: f64,
    pub kmax_used: usize,
}

impl RangeField {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.ranges.iter().copied().fold(0.0, f64::max)
    }
}

/// `E[d_i(x)] = Γ(i + 1/d) / Γ(i) · (λ c(d))^{-1/d}`.
pub fn expected_knn_distance(i: usize, dim: usize, density: f64) -> Result<f64> {
    let c = unit_ball_volume(dim)?;
    let a = 1.0 / dim as f64;
    Ok((ln_gamma(i as f64 + a) - ln_gamma(i as f64)).exp() * (density * c).powf(-a))
}

/// `Σ_{i>=m} α_i E[d_i]` for the geometric part of `alpha` beyond the head.
fn geometric_tail_expectation(
    coef: f64,
    gamma: f64,
    m: usize,
    dim: usize,
    density: f64,
) -> Result<f64> {
    let a = 1.0 / dim as f64;
    let scale = (density * unit_ball_volume(dim)?).powf(-a);
    let g = |i: usize| (ln_gamma(i as f64 + a) - ln_gamma(i as f64)).exp();
    // Σ_{i>=1} γ^i Γ(i+a)/Γ(i) = γ Γ(1+a) (1-γ)^{-(1+a)}
    let full = gamma * (ln_gamma(1.0 + a)).exp() * (1.0 - gamma).powf(-(1.0 + a));
    let head: f64 = (1..m).map(|i| gamma.powi(i as i32) * g(i)).sum();
    let closed = full - head;
    let value = if closed > 1e-6 * full {
        closed
    } else {
        // cancellation: sum the rapidly converging tail directly
        let mut s = 0.0;
        let mut i = m;
        loop {
            let t = gamma.powi(i as i32) * g(i);
            s += t;
            if t < 1e-17 * s || t == 0.0 {
                break;
            }
            i += 1;
        }
        s
    };
    Ok(coef * value * scale)
}

/// Expected truncation error when only the first `kmax` terms are kept.
pub fn truncation_bound(alpha: &AlphaSpec, kmax: usize, dim: usize, density: f64) -> Result<f64> {
    let head_len = alpha.head().len();
    let mut bound = 0.0;
    for i in (kmax + 1)..=head_len {
        bound += alpha.head()[i - 1] * expected_knn_distance(i, dim, density)?;
    }
    match alpha.tail() {
        Tail::None => {}
        Tail::Geometric { coef, gamma } => {
            bound += geometric_tail_expectation(
                coef,
                gamma,
                (kmax + 1).max(head_len + 1),
                dim,
                density,
            )?;
        }
        Tail::PowerLaw { coef: 0.0, .. } => {}
        Tail::PowerLaw { .. } => {
            return Err(Error::Unsupported(
                "power-law tails cannot be simulated".into(),
            ));
        }
    }
    Ok(bound)
}

/// Relative truncation tolerance used to pick `kmax` for infinite-support
/// weight vectors.
pub const TRUNCATION_TOLERANCE: f64 = 1e-3;

/// Number of neighbour columns needed to evaluate `r(x)`: the support for
/// finite vectors, otherwise the smallest `kmax` whose truncation bound is
/// below `1e-3` of the expected head range.
pub fn choose_kmax(alpha: &AlphaSpec, dim: usize, density: f64) -> Result<usize> {
    if let Some(s) = alpha.support() {
        return Ok(s.max(1));
    }
    if alpha.total().is_infinite() {
        return Err(Error::InfiniteRange);
    }
    let start = alpha.head().len().max(1);
    let mut head_mean: f64 = (1..start)
        .map(|i| Ok(alpha.coefficient(i) * expected_knn_distance(i, dim, density)?))
        .sum::<Result<f64>>()?;
    for kmax in start..100_000 {
        head_mean += alpha.coefficient(kmax) * expected_knn_distance(kmax, dim, density)?;
        let bound = truncation_bound(alpha, kmax, dim, density)?;
        if bound < TRUNCATION_TOLERANCE * head_mean || bound == 0.0 {
            return Ok(kmax);
        }
    }
    Err(Error::Unsupported(
        "weight vector decays too slowly to truncate".into(),
    ))
}

/// `r(x) = Σ_{i<=kmax} α_i d_i(x)` for every row of `table`.
pub fn connection_ranges(table: &NeighborTable, alpha: &AlphaSpec) -> Result<RangeField> {
    if alpha.total().is_infinite() {
        return Err(Error::InfiniteRange);
    }
    let (kmax_used, truncation) = match alpha.support() {
        Some(s) => {
            if s > table.cols() {
                return Err(Error::TruncatedTable {
                    required: s,
                    available: table.cols(),
                });
            }
            (s, 0.0)
        }
        None => {
            if let Tail::PowerLaw { .. } = alpha.tail() {
                return Err(Error::Unsupported(
                    "power-law tails cannot be simulated".into(),
                ));
            }
            if table.truncated() || table.cols() < alpha.head().len() {
                return Err(Error::TruncatedTable {
                    required: table.kmax().max(alpha.head().len()),
                    available: table.cols(),
                });
            }
            let k = table.cols();
            (k, truncation_bound(alpha, k, table.dim(), table.density())?)
        }
    };
    let weights: Vec<f64> = (1..=kmax_used).map(|i| alpha.coefficient(i)).collect();
    let ranges = (0..table.len())
        .map(|p| {
            table.distances(p)[..kmax_used]
                .iter()
                .zip(&weights)
                .map(|(d, w)| d * w)
                .sum()
        })
        .collect();
    Ok(RangeField {
        ranges,
        truncation_bound: truncation,
        kmax_used,
    })
}

/// `E[r(x)] = ½ Σ i α_i` for the one-dimensional process at unit density.
pub fn expected_range_1d(alpha: &AlphaSpec) -> Moment {
    match alpha.sum_i_alpha() {
        Moment::Finite(v) => Moment::Finite(0.5 * v),
        Moment::Infinite => Moment::Infinite,
    }
}

/// `E[r(x)] = Σ α_i Γ(i + 1/d)/Γ(i) · (λ c(d))^{-1/d}` in `d` dimensions.
pub fn expected_range(alpha: &AlphaSpec, dim: usize, density: f64) -> Result<Moment> {
    if divergence_classifier(alpha, dim)? == RangeClass::Infinite {
        return Ok(Moment::Infinite);
    }
    let mut sum = 0.0;
    for (i, a) in alpha.head().iter().enumerate() {
        sum += a * expected_knn_distance(i + 1, dim, density)?;
    }
    match alpha.tail() {
        Tail::None => {}
        Tail::Geometric { coef, gamma } => {
            sum += geometric_tail_expectation(coef, gamma, alpha.head().len() + 1, dim, density)?;
        }
        Tail::PowerLaw { coef: 0.0, .. } => {}
        Tail::PowerLaw { .. } => {
            return Err(Error::Unsupported(
                "expected range of power-law tails".into(),
            ));
        }
    }
    Ok(Moment::Finite(sum))
}

/// Laplace transform `φ_V(s) = Π_i 1/(1 + β_i s/2)` of `V = Σ β_i U_i`,
/// `U_i` i.i.d. Exp(2).
///
/// The product runs until `β_i s/2 < 1e-16`; the remaining factors are
/// replaced by `exp(-(s/2) Σ_{j>=i} β_j)`. A divergent `Σ β_i` gives 0 for
/// every `s > 0`.
pub fn laplace_v(alpha: &AlphaSpec, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain(
            "laplace_v",
            format!("s must be >= 0, got {s}"),
        ));
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    if alpha.sum_i_alpha().is_infinite() {
        return Ok(0.0);
    }
    const MAX_TERMS: usize = 10_000_000;
    let mut log_phi = 0.0;
    let mut i = 1;
    loop {
        let x = alpha.beta(i) * s / 2.0;
        if (x < 1e-16 && i > alpha.head().len()) || i > MAX_TERMS {
            log_phi -= 0.5 * s * alpha.sum_beta_from(i);
            break;
        }
        log_phi -= x.ln_1p();
        i += 1;
    }
    Ok(log_phi.exp())
}

/// The first `depth` factors of [`laplace_v`]'s product, no tail estimate.
pub fn laplace_v_partial(alpha: &AlphaSpec, s: f64, depth: usize) -> f64 {
    (1..=depth)
        .map(|i| 1.0 / (1.0 + alpha.beta(i) * s / 2.0))
        .product()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeClass {
    Finite,
    Infinite,
}

/// Whether `r(x) = ∞` almost surely, i.e. `Σ i^{1/d} α_i = ∞`.
///
/// Finite support and geometric tails always give finite ranges; a
/// power-law tail `c·i^{-p}` diverges iff `p <= 1 + 1/d`.
pub fn divergence_classifier(alpha: &AlphaSpec, dim: usize) -> Result<RangeClass> {
    if dim == 0 {
        return Err(Error::domain(
            "divergence_classifier",
            "dimension must be >= 1",
        ));
    }
    Ok(match alpha.tail() {
        Tail::None | Tail::Geometric { .. } => RangeClass::Finite,
        Tail::PowerLaw { coef: 0.0, .. } => RangeClass::Finite,
        Tail::PowerLaw { exponent, .. } => {
            if exponent <= 1.0 + 1.0 / dim as f64 {
                RangeClass::Infinite
            } else {
                RangeClass::Finite
            }
        }
    })
}
