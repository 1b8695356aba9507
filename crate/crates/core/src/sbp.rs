//! The spatial branching process (SBP) used for high-dimensional
//! percolation, its projection to the plane, and Monte Carlo checks of the
//! high-dimensional geometry it relies on.
//!
//! Every individual `y` scatters a Poisson process of intensity `1/c(d)` on
//! the ball `S_{1+δ₁}(y)` (one expected point per unit ball) and keeps the
//! points met while growing a ball around `y`, stopping at radius `1 + δ₁`
//! or after `c₂` points. The offspring count is `min(Y, c₂)` with
//! `Y ~ Poisson((1+δ₁)^d)`.
//!
//! Offspring are drawn as arrival times `T_1 < T_2 < ...` of a unit-rate
//! Poisson process in the volume coordinate `ρ^d`, each with a uniform
//! direction. Each individual's random stream is keyed by its genealogical
//! path, so raising `δ₁` (or `c₂`) only adds individuals: runs are nested.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson as PoissonDist};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, StreamRng};
use crate::stats::{wilson_ci, CIEstimate};

/// Uniform direction on the unit sphere in `ℝ^d`.
pub fn uniform_on_sphere<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return g.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `L(x) = √d (x_1, x_2)`.
pub fn project_l(x: &[f64]) -> Result<[f64; 2]> {
    if x.len() < 2 {
        return Err(Error::domain(
            "project_l",
            format!("needs dimension >= 2, got {}", x.len()),
        ));
    }
    let s = (x.len() as f64).sqrt();
    Ok([s * x[0], s * x[1]])
}

/// `E[min(Y, c₂)] = Σ_{j<c₂} P(Y > j)` for `Y ~ Poisson(μ)`.
pub fn expected_capped_offspring(mu: f64, c2: u32) -> f64 {
    if mu <= 0.0 {
        return 0.0;
    }
    let dist = PoissonDist::new(mu).expect("mu > 0");
    (0..c2 as u64).map(|j| dist.sf(j)).sum()
}

/// `δ₁` such that `E[min(Y, c₂)] = c₁` with `Y ~ Poisson((1+δ₁)^d)`.
pub fn calibrate_delta1(dim: usize, c1: f64, c2: u32) -> Result<f64> {
    if dim == 0 {
        return Err(Error::domain("calibrate_delta1", "dimension must be >= 1"));
    }
    if !(c1 > 1.0 && c1 < c2 as f64) {
        return Err(Error::domain(
            "calibrate_delta1",
            format!("need 1 < c1 < c2, got c1={c1}, c2={c2}"),
        ));
    }
    let mut lo = 1.0;
    let mut hi = 2.0 * c1;
    while expected_capped_offspring(hi, c2) < c1 {
        hi *= 2.0;
    }
    for _ in 0..500 {
        let mid = 0.5 * (lo + hi);
        let e = expected_capped_offspring(mid, c2);
        if (e - c1).abs() < 1e-10 {
            lo = mid;
            hi = mid;
            break;
        }
        if e < c1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    Ok((mu.ln() / dim as f64).exp_m1())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbpConfig {
    pub dim: usize,
    pub delta1: f64,
    pub c2: u32,
    pub generations: usize,
    pub seed: u64,
    /// Stop once a generation would exceed this many individuals.
    #[serde(default = "default_max_population")]
    pub max_population: usize,
}

fn default_max_population() -> usize {
    1_000_000
}

impl SbpConfig {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::domain("SbpConfig", "dimension must be >= 1"));
        }
        if !(self.delta1 > -1.0 && self.delta1.is_finite()) {
            return Err(Error::domain(
                "SbpConfig",
                format!("delta1 must exceed -1, got {}", self.delta1),
            ));
        }
        Ok(())
    }

    /// Poisson parameter `(1 + δ₁)^d` of the uncapped offspring count.
    pub fn mu(&self) -> f64 {
        (1.0 + self.delta1).powi(self.dim as i32)
    }

    pub fn mean_offspring(&self) -> f64 {
        expected_capped_offspring(self.mu(), self.c2)
    }
}

/// Advance the arrival clock by an Exp(1) step.
fn next_arrival(rng: &mut StreamRng, t: &mut f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    *t += e;
    *t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbpRealization {
    pub dim: usize,
    /// Coordinates of each generation, point-major.
    pub generations: Vec<Vec<f64>>,
    /// Index of each individual's parent in the previous generation.
    pub parents: Vec<Vec<usize>>,
    /// Distance from each individual to its parent.
    pub birth_radii: Vec<Vec<f64>>,
    /// Offspring count of every individual that reproduced.
    pub offspring_counts: Vec<u32>,
    pub extinct: bool,
    /// The population cap stopped the run early.
    pub capped: bool,
}

impl SbpRealization {
    pub fn generation_size(&self, g: usize) -> usize {
        self.generations[g].len() / self.dim
    }

    /// CSV with columns `generation,id,parent,x0..x{d-1},proj_x,proj_y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["generation".to_string(), "id".into(), "parent".into()];
        header.extend((0..self.dim).map(|a| format!("x{a}")));
        if self.dim >= 2 {
            header.extend(["proj_x".into(), "proj_y".into()]);
        }
        writeln!(w, "{}", header.join(","))?;
        for (g, coords) in self.generations.iter().enumerate() {
            for (id, p) in coords.chunks(self.dim).enumerate() {
                let parent = if g == 0 {
                    String::new()
                } else {
                    self.parents[g][id].to_string()
                };
                let mut row = vec![g.to_string(), id.to_string(), parent];
                row.extend(p.iter().map(|x| format!("{x:?}")));
                if self.dim >= 2 {
                    let l = project_l(p)?;
                    row.extend([format!("{:?}", l[0]), format!("{:?}", l[1])]);
                }
                writeln!(w, "{}", row.join(","))?;
            }
        }
        Ok(())
    }
}

/// Run the full `d`-dimensional SBP from the origin.
pub fn run_sbp(cfg: &SbpConfig) -> Result<SbpRealization> {
    cfg.validate()?;
    let d = cfg.dim;
    let mu = cfg.mu();
    let mut generations = vec![vec![0.0; d]];
    let mut parents = vec![Vec::new()];
    let mut birth_radii = vec![Vec::new()];
    let mut seeds = vec![cfg.seed];
    let mut offspring_counts = Vec::new();
    let mut capped = false;
    for _ in 0..cfg.generations {
        let prev = generations.last().expect("generation 0");
        let broods: Vec<(Vec<f64>, Vec<f64>, Vec<u64>)> = prev
            .par_chunks(d)
            .zip(seeds.par_iter())
            .map(|(y, &s)| {
                let mut rng = stream(s, 0);
                let mut t = 0.0;
                let mut pts = Vec::new();
                let mut radii = Vec::new();
                let mut kids = Vec::new();
                for j in 0..cfg.c2 {
                    if next_arrival(&mut rng, &mut t) > mu {
                        break;
                    }
                    let rho = t.powf(1.0 / d as f64);
                    let u = uniform_on_sphere(d, &mut rng);
                    pts.extend(y.iter().zip(&u).map(|(a, b)| a + rho * b));
                    radii.push(rho);
                    kids.push(derive_seed(s, j as u64));
                }
                (pts, radii, kids)
            })
            .collect();
        let total: usize = broods.iter().map(|b| b.1.len()).sum();
        if total > cfg.max_population {
            capped = true;
            break;
        }
        let mut next = Vec::with_capacity(total * d);
        let mut par = Vec::with_capacity(total);
        let mut radii = Vec::with_capacity(total);
        let mut next_seeds = Vec::with_capacity(total);
        for (p, (pts, r, s)) in broods.into_iter().enumerate() {
            offspring_counts.push(r.len() as u32);
            par.extend(std::iter::repeat_n(p, r.len()));
            next.extend(pts);
            radii.extend(r);
            next_seeds.extend(s);
        }
        generations.push(next);
        parents.push(par);
        birth_radii.push(radii);
        seeds = next_seeds;
        if total == 0 {
            break;
        }
    }
    let extinct = generations.last().is_some_and(|g| g.is_empty());
    Ok(SbpRealization {
        dim: d,
        generations,
        parents,
        birth_radii,
        offspring_counts,
        extinct,
        capped,
    })
}

/// Generation `n0` of the SBP projected by `L` and started at the projected
/// point `start`. Only the two projected coordinates are simulated: a child
/// at distance `ρ` in direction `g/‖g‖` moves by `√d ρ (g_1, g_2)/‖g‖`, with
/// `‖g‖² = g_1² + g_2² + χ²_{d-2}`.
pub fn run_projected(cfg: &SbpConfig, start: [f64; 2], n0: usize) -> Result<(Vec<[f64; 2]>, bool)> {
    cfg.validate()?;
    if cfg.dim < 2 {
        return Err(Error::domain(
            "run_projected",
            "projection needs dimension >= 2",
        ));
    }
    let d = cfg.dim as f64;
    let mu = cfg.mu();
    let chi = if cfg.dim > 2 {
        Some(
            Gamma::new((d - 2.0) / 2.0, 2.0)
                .map_err(|e| Error::domain("run_projected", e.to_string()))?,
        )
    } else {
        None
    };
    let mut gen = vec![(start, cfg.seed)];
    for _ in 0..n0 {
        let next: Vec<Vec<([f64; 2], u64)>> = gen
            .par_iter()
            .map(|&(y, s)| {
                let mut rng = stream(s, 0);
                let mut t = 0.0;
                let mut kids = Vec::new();
                for j in 0..cfg.c2 {
                    if next_arrival(&mut rng, &mut t) > mu {
                        break;
                    }
                    let rho = t.powf(1.0 / d);
                    let g1: f64 = rng.sample(StandardNormal);
                    let g2: f64 = rng.sample(StandardNormal);
                    let rest = chi.as_ref().map_or(0.0, |c| c.sample(&mut rng));
                    let norm = (g1 * g1 + g2 * g2 + rest).sqrt();
                    let scale = d.sqrt() * rho / norm;
                    kids.push((
                        [y[0] + scale * g1, y[1] + scale * g2],
                        derive_seed(s, j as u64),
                    ));
                }
                kids
            })
            .collect();
        let total: usize = next.iter().map(Vec::len).sum();
        if total > cfg.max_population {
            return Ok((gen.into_iter().map(|g| g.0).collect(), true));
        }
        gen = next.into_iter().flatten().collect();
        if gen.is_empty() {
            break;
        }
    }
    Ok((gen.into_iter().map(|g| g.0).collect(), false))
}

/// Monte Carlo estimate of `|S_{r2}(x2) ∩ S_{r1}(x1)| / |S_{r1}(x1)|`.
pub fn overlap_ratio(
    x1: &[f64],
    x2: &[f64],
    r1: f64,
    r2: f64,
    samples: u64,
    seed: u64,
    level: f64,
) -> Result<CIEstimate> {
    if x1.len() != x2.len() || x1.is_empty() {
        return Err(Error::domain(
            "overlap_ratio",
            "centres must share a positive dimension",
        ));
    }
    if !(r1 > 0.0 && r2 >= 0.0) {
        return Err(Error::domain("overlap_ratio", "radii must be positive"));
    }
    let d = x1.len();
    const CHUNK: u64 = 8192;
    let chunks = samples.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, c);
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len)
                .filter(|_| {
                    let u = uniform_on_sphere(d, &mut rng);
                    let rho = r1 * rng.random::<f64>().powf(1.0 / d as f64);
                    let dist2: f64 = (0..d)
                        .map(|a| {
                            let z = x1[a] + rho * u[a] - x2[a];
                            z * z
                        })
                        .sum();
                    dist2 <= r2 * r2
                })
                .count() as u64
        })
        .sum();
    wilson_ci(hits, samples, level)
}

/// `S_{i,j} = [M(i-½), M(i+½)] × [M(j-½), M(j+½)]`.
pub fn lattice_square(m: f64, i: i64, j: i64) -> ([f64; 2], [f64; 2]) {
    let (i, j) = (i as f64, j as f64);
    (
        [m * (i - 0.5), m * (j - 0.5)],
        [m * (i + 0.5), m * (j + 0.5)],
    )
}

fn in_square(p: [f64; 2], sq: ([f64; 2], [f64; 2])) -> bool {
    (0..2).all(|a| p[a] >= sq.0[a] && p[a] <= sq.1[a])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxReachConfig {
    pub dim: usize,
    pub c1: f64,
    pub c2: u32,
    /// Lattice square side `M`.
    pub side: f64,
    /// Generation inspected, `N₀`.
    pub n0: usize,
    /// Projected start point, normally inside `S_{0,0}`.
    pub start: [f64; 2],
    pub trials: u64,
    pub seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_max_population")]
    pub max_population: usize,
}

fn default_level() -> f64 {
    0.95
}

/// Probability that generation `N₀` of the projected SBP started in
/// `S_{0,0}` has points in both `S_{1,-1}` and `S_{1,1}`.
pub fn box_reach_probability(cfg: &BoxReachConfig) -> Result<CIEstimate> {
    let delta1 = calibrate_delta1(cfg.dim, cfg.c1, cfg.c2)?;
    if cfg.trials == 0 {
        return Err(Error::domain(
            "box_reach_probability",
            "trials must be >= 1",
        ));
    }
    let down = lattice_square(cfg.side, 1, -1);
    let up = lattice_square(cfg.side, 1, 1);
    let hits = (0..cfg.trials)
        .map(|t| {
            let sbp = SbpConfig {
                dim: cfg.dim,
                delta1,
                c2: cfg.c2,
                generations: cfg.n0,
                seed: derive_seed(cfg.seed, t),
                max_population: cfg.max_population,
            };
            let (gen, _) = run_projected(&sbp, cfg.start, cfg.n0)?;
            Ok(cfg.n0 > 0
                && gen.iter().any(|&p| in_square(p, down))
                && gen.iter().any(|&p| in_square(p, up)))
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&h| h)
        .count() as u64;
    wilson_ci(hits, cfg.trials, cfg.level)
}
