//! One-dimensional analysis: gaps, bridges, the unbridged-gap probability
//! `p(m)` and the closed-form bounds used to show that 1D GN graphs never
//! percolate.
//!
//! A gap `(x, x + m)` with `x` a point is *bridged from the right* when some
//! point `y >= x + m` has `y - r(y) < x`, and *bridged from the left* when
//! some point `y <= x` has `y + r(y) > x + m`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::geometry::{knn_table, sample_poisson, BoxRegion, Metric, PointSet};
use crate::gnmodel::{choose_kmax, connection_ranges, AlphaSpec};
use crate::rng::derive_seed;
use crate::stats::{wilson_ci, CIEstimate};

/// An empty interval `(left, left + length)` between consecutive points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub left: f64,
    pub length: f64,
    pub left_point_index: usize,
    pub right_point_index: usize,
}

impl GapRecord {
    pub fn right(&self) -> f64 {
        self.left + self.length
    }
}

fn check_sorted(op: &'static str, xs: &[f64]) -> Result<()> {
    if xs.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::domain(op, "points must be sorted ascending"));
    }
    Ok(())
}

/// All gaps of length strictly greater than `m` between consecutive points.
pub fn find_gaps(points: &[f64], m: f64) -> Result<Vec<GapRecord>> {
    check_sorted("find_gaps", points)?;
    Ok(points
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] - w[0] > m)
        .map(|(i, w)| GapRecord {
            left: w[0],
            length: w[1] - w[0],
            left_point_index: i,
            right_point_index: i + 1,
        })
        .collect())
}

/// `x_{i+k} - x_i` for every `i` with `i + k < n`: the distance to the
/// `k`-th point on the right, Gamma(k, λ) distributed on a Poisson line.
pub fn right_knn_distances(points: &[f64], k: usize) -> Result<Vec<f64>> {
    check_sorted("right_knn_distances", points)?;
    if k == 0 {
        return Err(Error::domain("right_knn_distances", "k must be >= 1"));
    }
    Ok(points.windows(k + 1).map(|w| w[k] - w[0]).collect())
}

/// Probability mass left outside the range envelope for a single point.
pub const ENVELOPE_EPSILON: f64 = 1e-12;

/// A sorted one-dimensional realisation observed in a finite window.
///
/// Ranges are computed from the window's points only, so they can only
/// overestimate the full-line ranges. A point is *reliable* when its
/// `kmax` nearest neighbours all lie inside the window; its range is then
/// exact.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSample {
    coords: Vec<f64>,
    ranges: Vec<f64>,
    reliable: Vec<bool>,
    window: (f64, f64),
    envelope: f64,
}

impl LineSample {
    /// `envelope` bounds the range of every point outside the window.
    pub fn new(
        coords: Vec<f64>,
        ranges: Vec<f64>,
        reliable: Vec<bool>,
        window: (f64, f64),
        envelope: f64,
    ) -> Result<Self> {
        check_sorted("LineSample", &coords)?;
        if ranges.len() != coords.len() || reliable.len() != coords.len() {
            return Err(Error::domain(
                "LineSample",
                "coords, ranges and reliable flags differ in length",
            ));
        }
        if !(window.0 < window.1) || coords.iter().any(|&x| x < window.0 || x > window.1) {
            return Err(Error::domain(
                "LineSample",
                "points must lie in a non-empty window",
            ));
        }
        if ranges.iter().any(|r| !(*r >= 0.0)) || !(envelope >= 0.0) {
            return Err(Error::domain(
                "LineSample",
                "ranges and envelope must be >= 0",
            ));
        }
        Ok(LineSample {
            coords,
            ranges,
            reliable,
            window,
            envelope,
        })
    }

    /// Sort a 1D free-boundary realisation, compute its ranges and the
    /// envelope `(Σ_{i<=kmax} α_i) · Q(1 - ε)` with `Q` the Gamma(kmax, λ)
    /// quantile.
    pub fn from_points(points: &PointSet, alpha: &AlphaSpec) -> Result<Self> {
        if points.dim() != 1 || points.metric() != Metric::EuclideanFree {
            return Err(Error::domain(
                "LineSample",
                "needs a one-dimensional euclidean-free point set",
            ));
        }
        let sorted = points.sorted_1d()?;
        let kmax = choose_kmax(alpha, 1, points.density())?;
        let table = knn_table(&sorted, kmax)?;
        let field = connection_ranges(&table, alpha)?;
        let (lo, hi) = (points.bbox().lower()[0], points.bbox().upper()[0]);
        let coords = sorted.coords().to_vec();
        let k = field.kmax_used;
        let reliable = coords
            .iter()
            .enumerate()
            .map(|(i, &y)| k == 0 || table.d(i, k) < (y - lo).min(hi - y))
            .collect();
        let weight: f64 = (1..=k).map(|i| alpha.coefficient(i)).sum();
        let envelope = if k == 0 || weight == 0.0 {
            0.0
        } else {
            weight * gamma_upper_quantile(k as f64, points.density(), ENVELOPE_EPSILON)
        };
        LineSample::new(coords, field.ranges, reliable, (lo, hi), envelope)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn reliable(&self) -> &[bool] {
        &self.reliable
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    pub fn envelope(&self) -> f64 {
        self.envelope
    }
}

/// `x` with `P(Gamma(shape, rate) > x) = eps`.
fn gamma_upper_quantile(shape: f64, rate: f64, eps: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = shape.max(1.0);
    while gamma_ur(shape, hi) > eps {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_ur(shape, mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    hi / rate
}

/// Bridging verdict for one side of one gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SideVerdict {
    pub bridged: bool,
    /// A reliable point that spans the gap, when one exists.
    pub bridging_point: Option<usize>,
    /// The verdict depends on points outside the window or on unreliable
    /// ranges; excluded from statistics.
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    pub gaps: Vec<GapRecord>,
    pub right: Vec<SideVerdict>,
    pub left: Vec<SideVerdict>,
}

impl BridgeReport {
    /// Fraction of gaps whose right verdict is censored.
    pub fn right_censoring_rate(&self) -> f64 {
        if self.gaps.is_empty() {
            return 0.0;
        }
        self.right.iter().filter(|v| v.censored).count() as f64 / self.gaps.len() as f64
    }
}

/// Running extremum of `key` over a sweep, tracking the overall value and
/// the best reliable index.
fn sweep<I: Iterator<Item = usize>>(
    order: I,
    n: usize,
    key: impl Fn(usize) -> f64,
    reliable: &[bool],
    better: impl Fn(f64, f64) -> bool,
    init: f64,
) -> (Vec<f64>, Vec<Option<usize>>) {
    let mut all = vec![init; n];
    let mut rel = vec![None; n];
    let mut cur = init;
    let mut best: Option<usize> = None;
    for i in order {
        let v = key(i);
        if better(v, cur) {
            cur = v;
        }
        if reliable[i] && best.is_none_or(|b| better(v, key(b))) {
            best = Some(i);
        }
        all[i] = cur;
        rel[i] = best;
    }
    (all, rel)
}

/// Bridging verdicts from both sides for every gap longer than `m`.
///
/// Right bridging uses the suffix minimum of `y - r(y)`, left bridging the
/// prefix maximum of `y + r(y)`. A "bridged" verdict needs a reliable
/// witness. An "unbridged" verdict is censored when a point beyond the
/// window could still reach across, i.e. when the gap lies within the range
/// envelope of the window edge.
pub fn bridge_scan(sample: &LineSample, m: f64) -> Result<BridgeReport> {
    let gaps = find_gaps(&sample.coords, m)?;
    let n = sample.coords.len();
    let x = &sample.coords;
    let r = &sample.ranges;
    let (lo, hi) = sample.window;
    let (suf_all, suf_rel) = sweep(
        (0..n).rev(),
        n,
        |i| x[i] - r[i],
        &sample.reliable,
        |a, b| a < b,
        f64::INFINITY,
    );
    let (pre_all, pre_rel) = sweep(
        0..n,
        n,
        |i| x[i] + r[i],
        &sample.reliable,
        |a, b| a > b,
        f64::NEG_INFINITY,
    );

    let mut right = Vec::with_capacity(gaps.len());
    let mut left = Vec::with_capacity(gaps.len());
    for g in &gaps {
        let (a, b) = (g.left_point_index, g.right_point_index);
        let (xl, xr) = (x[a], x[b]);
        right.push(match suf_rel[b] {
            Some(w) if x[w] - r[w] < xl => SideVerdict {
                bridged: true,
                bridging_point: Some(w),
                censored: false,
            },
            _ => SideVerdict {
                bridged: false,
                bridging_point: None,
                censored: suf_all[b] < xl || hi - xl <= sample.envelope,
            },
        });
        left.push(match pre_rel[a] {
            Some(w) if x[w] + r[w] > xr => SideVerdict {
                bridged: true,
                bridging_point: Some(w),
                censored: false,
            },
            _ => SideVerdict {
                bridged: false,
                bridging_point: None,
                censored: pre_all[a] > xr || xr - lo <= sample.envelope,
            },
        });
    }
    Ok(BridgeReport { gaps, right, left })
}

/// Parameters of a `p(m)` Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmConfig {
    pub alpha: AlphaSpec,
    pub m: f64,
    /// Windows sampled; each contributes at most one Bernoulli outcome.
    pub trials: u64,
    /// Window length `T`.
    pub window: f64,
    #[serde(default = "one")]
    pub density: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn one() -> f64 {
    1.0
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmEstimate {
    pub ci: CIEstimate,
    pub kmax: usize,
    /// Windows without an uncensored gap in `(0.1 T, 0.9 T)`.
    pub discarded: u64,
    pub windows: u64,
}

impl PmEstimate {
    pub fn discard_rate(&self) -> f64 {
        self.discarded as f64 / self.windows as f64
    }
}

/// Outcome of one window: `Some(unbridged)` for the first uncensored gap
/// strictly inside `(0.1 T, 0.9 T)`, `None` if there is none.
pub fn pm_window(cfg: &PmConfig, index: u64) -> Result<Option<bool>> {
    let bbox = BoxRegion::cube(1, 0.0, cfg.window)?;
    let points = sample_poisson(
        &bbox,
        cfg.density,
        derive_seed(cfg.seed, index),
        Metric::EuclideanFree,
    )?;
    if points.len() < 2 {
        return Ok(None);
    }
    let sample = LineSample::from_points(&points, &cfg.alpha)?;
    let report = bridge_scan(&sample, cfg.m)?;
    let (a, b) = (0.1 * cfg.window, 0.9 * cfg.window);
    Ok(report
        .gaps
        .iter()
        .zip(&report.right)
        .find(|(g, v)| g.left > a && g.right() < b && !v.censored)
        .map(|(_, v)| !v.bridged))
}

/// Monte Carlo estimate of `p(m)`, the probability that an `m`-gap is not
/// bridged from the right, with a Wilson interval.
pub fn estimate_p_unbridged(cfg: &PmConfig) -> Result<PmEstimate> {
    if !(cfg.m > 0.0) {
        return Err(Error::domain(
            "estimate_p_unbridged",
            format!("m must be > 0, got {}", cfg.m),
        ));
    }
    if !(cfg.window > 10.0 * cfg.m) {
        return Err(Error::domain(
            "estimate_p_unbridged",
            format!("window {} must exceed 10 m = {}", cfg.window, 10.0 * cfg.m),
        ));
    }
    if cfg.trials == 0 {
        return Err(Error::domain("estimate_p_unbridged", "trials must be >= 1"));
    }
    let kmax = choose_kmax(&cfg.alpha, 1, cfg.density)?;
    let outcomes: Vec<Option<bool>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| pm_window(cfg, t))
        .collect::<Result<_>>()?;
    let used: Vec<bool> = outcomes.iter().flatten().copied().collect();
    let discarded = cfg.trials - used.len() as u64;
    if used.is_empty() {
        return Err(Error::domain(
            "estimate_p_unbridged",
            format!(
                "no window of length {} produced an uncensored {}-gap",
                cfg.window, cfg.m
            ),
        ));
    }
    let unbridged = used.iter().filter(|&&u| u).count() as u64;
    Ok(PmEstimate {
        ci: wilson_ci(unbridged, used.len() as u64, cfg.level)?,
        kmax,
        discarded,
        windows: cfg.trials,
    })
}

pub const PM_CSV_HEADER: &str = "alpha,kmax,m,trials,p_hat,ci_low,ci_high,discard_rate";

/// One CSV row matching [`PM_CSV_HEADER`]; `alpha` is embedded as quoted JSON.
pub fn write_pm_row<W: Write>(cfg: &PmConfig, est: &PmEstimate, mut w: W) -> Result<()> {
    let alpha = serde_json::to_string(&cfg.alpha)?.replace('"', "\"\"");
    writeln!(
        w,
        "\"{alpha}\",{},{:?},{},{:?},{:?},{:?},{:?}",
        est.kmax,
        cfg.m,
        est.ci.trials,
        est.ci.p_hat,
        est.ci.lower,
        est.ci.upper,
        est.discard_rate()
    )?;
    Ok(())
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn poisson_partial_ln(t: f64, from: usize, to: usize) -> f64 {
    log_sum_exp((from..=to).map(|i| -t + i as f64 * t.ln() - ln_factorial(i as u64)))
}

/// `[Σ_{i=1}^{k-1} e^{-n} n^i / i!] / [Σ_{i=1}^{k-1} e^{-β} β^i / i!]`,
/// the conditional gamma tail ratio with sums starting at `i = 1`.
///
/// Behaves like `c(β, k) n^{k-1} e^{-n}` as `n` grows. For `k = 1` both sums
/// are empty and the ratio is undefined.
pub fn gamma_tail_ratio(n: f64, beta: f64, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::domain(
            "gamma_tail_ratio",
            "empty sum: k must be >= 2",
        ));
    }
    if !(beta > 0.0 && n >= beta) {
        return Err(Error::domain(
            "gamma_tail_ratio",
            format!("need n >= beta > 0, got n={n}, beta={beta}"),
        ));
    }
    Ok((poisson_partial_ln(n, 1, k - 1) - poisson_partial_ln(beta, 1, k - 1)).exp())
}

/// `P(Γ >= n | Γ > β)` for `Γ ~ Gamma(k, 1)`: the same ratio with sums
/// from `i = 0`.
pub fn standard_gamma_tail_ratio(n: f64, beta: f64, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::domain("standard_gamma_tail_ratio", "k must be >= 1"));
    }
    if !(beta > 0.0 && n >= beta) {
        return Err(Error::domain(
            "standard_gamma_tail_ratio",
            format!("need n >= beta > 0, got n={n}, beta={beta}"),
        ));
    }
    Ok((poisson_partial_ln(n, 0, k - 1) - poisson_partial_ln(beta, 0, k - 1)).exp())
}

/// Markov lower bound `max(0, 1 - γ/(m(1-γ)²))` on `P(r(X_0) < m)` for
/// `α_i = γ^i` on the unit-rate line.
pub fn markov_range_bound(gamma: f64, m: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 0.5) {
        return Err(Error::domain(
            "markov_range_bound",
            format!("gamma must lie in (0, 1/2], got {gamma}"),
        ));
    }
    if !(m > 0.0) {
        return Err(Error::domain(
            "markov_range_bound",
            format!("m must be > 0, got {m}"),
        ));
    }
    Ok((1.0 - gamma / (m * (1.0 - gamma) * (1.0 - gamma))).max(0.0))
}

/// First consecutive pair `(i, i + 1)` of sorted points with
/// `x_i - r(x_i) > x_{i+1} - r(x_{i+1})`, up to a relative tolerance of
/// `1e-12`. `x - r(x)` is nondecreasing iff the inequality
/// `X_0 - r(X_0) <= X_k - r(X_k)` holds for every ordered pair.
pub fn find_shift_violation(points: &[f64], ranges: &[f64]) -> Result<Option<(usize, usize)>> {
    check_sorted("find_shift_violation", points)?;
    if points.len() != ranges.len() {
        return Err(Error::domain(
            "find_shift_violation",
            "points and ranges differ in length",
        ));
    }
    Ok((1..points.len())
        .find(|&i| {
            let a = points[i - 1] - ranges[i - 1];
            let b = points[i] - ranges[i];
            let tol = 1e-12 * (points[i - 1].abs() + points[i].abs() + ranges[i - 1] + ranges[i]);
            a > b + tol
        })
        .map(|i| (i - 1, i)))
}

pub fn shift_monotonicity_check(points: &[f64], ranges: &[f64]) -> Result<bool> {
    Ok(find_shift_violation(points, ranges)?.is_none())
}
