//! Monte Carlo engine: crossing trials, crossing-probability curves over a
//! grid of range multipliers, and bisection for a finite-size critical value.
//!
//! Trial `i` of an experiment samples its points with seed
//! `derive_seed(base_seed, i)`, so every result is reproducible from the
//! spec and the trial index, whatever the thread count. Curves and
//! bisection probes reuse the same realisations for every multiplier
//! (common random numbers); since edge sets grow with `α` on a fixed
//! realisation, estimated curves are monotone.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::stats::{wilson_ci, CIEstimate};

use crate::clusters::{crossing_exists, label_clusters};
use crate::error::{Error, Result};
use crate::geometry::{
    default_margin, knn_table, sample_poisson, BoxRegion, Metric, NeighborTable, PointSet,
};
use crate::gnmodel::{build_graph, choose_kmax, connection_ranges, AlphaSpec, Variant};
use crate::rng::derive_seed;

/// Everything that determines the distribution of a crossing experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Weight vector; curves and bisection scale it by a multiplier.
    pub alpha: AlphaSpec,
    pub dim: usize,
    #[serde(default)]
    pub variant: Variant,
    /// Side `L` of the inner box `[0, L]^d`.
    pub side: f64,
    #[serde(default = "one")]
    pub density: f64,
    /// Buffer added around the inner box; defaults to
    /// `3 (k / (λ c(d)))^{1/d}`.
    #[serde(default)]
    pub margin: Option<f64>,
    pub trials: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub axis: usize,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn one() -> f64 {
    1.0
}

fn default_level() -> f64 {
    0.95
}

impl ExperimentSpec {
    pub fn inner_box(&self) -> Result<BoxRegion> {
        BoxRegion::cube(self.dim, 0.0, self.side)
    }

    pub fn kmax(&self) -> Result<usize> {
        choose_kmax(&self.alpha, self.dim, self.density)
    }

    /// The margin actually used.
    pub fn resolved_margin(&self) -> Result<f64> {
        match self.margin {
            Some(m) if m >= 0.0 => Ok(m),
            Some(m) => Err(Error::domain(
                "ExperimentSpec",
                format!("margin must be >= 0, got {m}"),
            )),
            None => default_margin(self.kmax()?, self.density, self.dim),
        }
    }

    pub fn sample_box(&self) -> Result<BoxRegion> {
        self.inner_box()?.inflate(self.resolved_margin()?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::domain("ExperimentSpec", "trials must be >= 1"));
        }
        if self.dim == 0 {
            return Err(Error::domain("ExperimentSpec", "dimension must be >= 1"));
        }
        if self.axis >= self.dim {
            return Err(Error::domain(
                "ExperimentSpec",
                format!("axis {} out of range", self.axis),
            ));
        }
        if !(self.side > 0.0 && self.density > 0.0) {
            return Err(Error::domain(
                "ExperimentSpec",
                "side and density must be > 0",
            ));
        }
        let kmax = self.kmax()?;
        let expected = self.density * self.sample_box()?.volume();
        if expected < 4.0 * (kmax + 1) as f64 {
            return Err(Error::domain(
                "ExperimentSpec",
                format!(
                    "window too small: about {expected:.1} points expected but the weight vector needs {} neighbours per point",
                    kmax
                ),
            ));
        }
        Ok(())
    }

    pub fn trial_seed(&self, trial: u64) -> u64 {
        derive_seed(self.base_seed, trial)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u64,
    pub seed: u64,
    pub n_points: usize,
    pub crossing: bool,
    pub largest_fraction: f64,
    /// Seconds; excluded from equality.
    pub wall_time: f64,
}

impl PartialEq for TrialResult {
    fn eq(&self, other: &Self) -> bool {
        self.trial == other.trial
            && self.seed == other.seed
            && self.n_points == other.n_points
            && self.crossing == other.crossing
            && self.largest_fraction == other.largest_fraction
    }
}

/// A sampled window with its neighbour table, reusable for any multiple of
/// the experiment's weight vector.
#[derive(Debug, Clone)]
pub struct Realization {
    pub trial: u64,
    pub seed: u64,
    pub points: PointSet,
    pub table: NeighborTable,
}

impl Realization {
    pub fn sample(spec: &ExperimentSpec, trial: u64) -> Result<Self> {
        let seed = spec.trial_seed(trial);
        let points = sample_poisson(
            &spec.sample_box()?,
            spec.density,
            seed,
            Metric::EuclideanFree,
        )?;
        let kmax = spec.kmax()?;
        if points.len() <= kmax {
            return Err(Error::InsufficientPoints {
                points: points.len(),
                required: kmax + 1,
            });
        }
        let table = knn_table(&points, kmax)?;
        Ok(Realization {
            trial,
            seed,
            points,
            table,
        })
    }

    /// Crossing verdict and largest cluster fraction for `alpha`.
    pub fn evaluate(&self, spec: &ExperimentSpec, alpha: &AlphaSpec) -> Result<(bool, f64)> {
        let ranges = connection_ranges(&self.table, alpha)?;
        let graph = build_graph(&self.points, &ranges, spec.variant)?;
        let labels = label_clusters(&graph);
        let report = crossing_exists(&labels, &self.points, &spec.inner_box()?, spec.axis)?;
        Ok((report.crossing, labels.largest_fraction))
    }
}

/// Run `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send, F: FnOnce() -> T + Send>(threads: Option<usize>, f: F) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::domain("threads", "thread count must be >= 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::domain("threads", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

pub fn run_trials(spec: &ExperimentSpec, threads: Option<usize>) -> Result<Vec<TrialResult>> {
    spec.validate()?;
    with_threads(threads, || {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| {
                let start = Instant::now();
                let real = Realization::sample(spec, t)?;
                let (crossing, largest_fraction) = real.evaluate(spec, &spec.alpha)?;
                Ok(TrialResult {
                    trial: t,
                    seed: real.seed,
                    n_points: real.points.len(),
                    crossing,
                    largest_fraction,
                    wall_time: start.elapsed().as_secs_f64(),
                })
            })
            .collect()
    })?
}

/// Realisations for every trial of `spec`, sampled once and shared by all
/// multipliers.
#[derive(Debug, Clone)]
pub struct RealizationCache {
    spec: ExperimentSpec,
    realizations: Vec<Realization>,
    threads: Option<usize>,
}

impl RealizationCache {
    pub fn new(spec: &ExperimentSpec, threads: Option<usize>) -> Result<Self> {
        spec.validate()?;
        let realizations = with_threads(threads, || {
            (0..spec.trials)
                .into_par_iter()
                .map(|t| Realization::sample(spec, t))
                .collect::<Result<Vec<_>>>()
        })??;
        Ok(RealizationCache {
            spec: spec.clone(),
            realizations,
            threads,
        })
    }

    pub fn spec(&self) -> &ExperimentSpec {
        &self.spec
    }

    pub fn realizations(&self) -> &[Realization] {
        &self.realizations
    }

    /// Per-trial crossing verdicts for the weight vector `a · α`.
    pub fn crossings(&self, a: f64) -> Result<Vec<bool>> {
        let alpha = self.spec.alpha.scaled(a)?;
        with_threads(self.threads, || {
            self.realizations
                .par_iter()
                .map(|r| Ok(r.evaluate(&self.spec, &alpha)?.0))
                .collect::<Result<Vec<bool>>>()
        })?
    }

    pub fn crossing_probability(&self, a: f64) -> Result<CIEstimate> {
        let hits = self.crossings(a)?.iter().filter(|&&c| c).count() as u64;
        wilson_ci(hits, self.realizations.len() as u64, self.spec.level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha: f64,
    pub ci: CIEstimate,
}

/// Crossing probability of `a · α` for every `a` in `grid` (sorted), using
/// the same realisations throughout.
pub fn crossing_curve(
    grid: &[f64],
    spec: &ExperimentSpec,
    threads: Option<usize>,
) -> Result<Vec<CurvePoint>> {
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::domain(
            "crossing_curve",
            "alpha grid must be sorted ascending",
        ));
    }
    let cache = RealizationCache::new(spec, threads)?;
    grid.iter()
        .map(|&a| {
            Ok(CurvePoint {
                alpha: a,
                ci: cache.crossing_probability(a)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bisection {
    pub alpha_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub target: f64,
    /// Every evaluated multiplier in evaluation order.
    pub probes: Vec<CurvePoint>,
}

/// Bisection of a monotone probability curve `f` for the point where it
/// crosses `target`. Stops once `hi - lo < tol` and returns the midpoint.
pub fn bisect_with<F>(mut f: F, bracket: (f64, f64), target: f64, tol: f64) -> Result<Bisection>
where
    F: FnMut(f64) -> Result<CIEstimate>,
{
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol > 0.0) || !(target > 0.0 && target < 1.0) {
        return Err(Error::domain(
            "bisect",
            "need lo < hi, tol > 0 and 0 < target < 1",
        ));
    }
    let mut probes = Vec::new();
    let p_lo = f(lo)?;
    let p_hi = f(hi)?;
    probes.push(CurvePoint {
        alpha: lo,
        ci: p_lo,
    });
    probes.push(CurvePoint {
        alpha: hi,
        ci: p_hi,
    });
    if !(p_lo.p_hat < target && p_hi.p_hat > target) {
        return Err(Error::Bracket {
            lo,
            hi,
            target,
            p_lo: p_lo.p_hat,
            p_hi: p_hi.p_hat,
        });
    }
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        let p = f(mid)?;
        probes.push(CurvePoint { alpha: mid, ci: p });
        if p.p_hat < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Bisection {
        alpha_hat: 0.5 * (lo + hi),
        lo,
        hi,
        target,
        probes,
    })
}

/// Multiplier `a` at which the crossing probability of `a · α` crosses
/// `target`, under common random numbers.
pub fn bisect_critical(
    spec: &ExperimentSpec,
    bracket: (f64, f64),
    target: f64,
    tol: f64,
    threads: Option<usize>,
) -> Result<Bisection> {
    let cache = RealizationCache::new(spec, threads)?;
    bisect_with(|a| cache.crossing_probability(a), bracket, target, tol)
}

/// JSONL: a header line with the version and spec, then one trial per line.
pub fn write_trials_jsonl<W: Write>(
    spec: &ExperimentSpec,
    results: &[TrialResult],
    mut w: W,
) -> Result<()> {
    let header = serde_json::json!({ "version": crate::VERSION, "spec": spec });
    writeln!(w, "{}", serde_json::to_string(&header)?)?;
    for r in results {
        writeln!(w, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

fn write_csv_preamble<W: Write>(spec: &ExperimentSpec, w: &mut W) -> Result<()> {
    writeln!(w, "# version: {}", crate::VERSION)?;
    writeln!(w, "# spec: {}", serde_json::to_string(spec)?)?;
    Ok(())
}

/// Curve CSV with `#` metadata lines followed by
/// `alpha,trials,p_hat,ci_low,ci_high`.
pub fn write_curve_csv<W: Write>(
    spec: &ExperimentSpec,
    curve: &[CurvePoint],
    mut w: W,
) -> Result<()> {
    write_csv_preamble(spec, &mut w)?;
    writeln!(w, "alpha,trials,p_hat,ci_low,ci_high")?;
    for p in curve {
        writeln!(
            w,
            "{:?},{},{:?},{:?},{:?}",
            p.alpha, p.ci.trials, p.ci.p_hat, p.ci.lower, p.ci.upper
        )?;
    }
    Ok(())
}

/// Bisection trace CSV: `probe,alpha,p_hat,ci_low,ci_high`.
pub fn write_bisection_csv<W: Write>(spec: &ExperimentSpec, b: &Bisection, mut w: W) -> Result<()> {
    write_csv_preamble(spec, &mut w)?;
    writeln!(w, "# alpha_hat: {:?}", b.alpha_hat)?;
    writeln!(w, "probe,alpha,p_hat,ci_low,ci_high")?;
    for (i, p) in b.probes.iter().enumerate() {
        writeln!(
            w,
            "{i},{:?},{:?},{:?},{:?}",
            p.alpha, p.ci.p_hat, p.ci.lower, p.ci.upper
        )?;
    }
    Ok(())
}
