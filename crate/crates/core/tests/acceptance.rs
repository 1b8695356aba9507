//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p gnperc --test acceptance`.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{brute_knn, sample, sorted_neighbours};
use gnperc::clusters::label_clusters;
use gnperc::geometry::{knn_table, unit_ball_volume, BoxRegion, Metric, PointSet};
use gnperc::gnmodel::{
    build_graph, choose_kmax, connection_ranges, nn_reference_graph, AlphaSpec, GNGraph, Variant,
};
use gnperc::mc::{bisect_critical, run_trials, ExperimentSpec};
use gnperc::oned::{estimate_p_unbridged, markov_range_bound, shift_monotonicity_check, PmConfig};
use gnperc::renorm::{
    alpha_bound_2d, banana_frequency, banana_prob, choose_subsquare_params, good_box_prob,
    grid_site_percolation, n_tilde, subsquare_good_grid_sampled, subsquare_good_scan,
    verify_corridor, PC_SITE_RIGOROUS,
};
use gnperc::rng::{derive_seed, stream};
use gnperc::sbp::{calibrate_delta1, overlap_ratio, project_l, uniform_on_sphere};
use gnperc::stats::{ks_test, mean_se, median};
use statrs::distribution::{ContinuousCDF, Exp, Gamma};

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn graph(ps: &PointSet, alpha: &AlphaSpec) -> GNGraph {
    let t = knn_table(ps, choose_kmax(alpha, ps.dim(), ps.density()).unwrap()).unwrap();
    build_graph(
        ps,
        &connection_ranges(&t, alpha).unwrap(),
        Variant::ReachUnion,
    )
    .unwrap()
}

fn edge_set(g: &GNGraph) -> BTreeSet<(usize, usize)> {
    g.edges().iter().copied().collect()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let ps = sample(1, 1.2e6, 1.0, 11, Metric::EuclideanFree);
    let t = knn_table(&ps, 3).unwrap();
    let interior = ps.interior_mask(50.0);
    let picked: Vec<usize> = (0..ps.len()).step_by(11).filter(|&i| interior[i]).collect();
    ensure(picked.len() >= 100_000, || {
        format!("only {} interior points", picked.len())
    })?;
    let exp2 = Exp::new(2.0).unwrap();
    let mut worst = 1.0f64;
    for j in 0..3 {
        let inc: Vec<f64> = picked
            .iter()
            .map(|&i| t.d(i, j + 1) - if j == 0 { 0.0 } else { t.d(i, j) })
            .collect();
        let ks = ks_test(&inc, |x| exp2.cdf(x));
        ensure(ks.p_value > 0.01, || {
            format!("1D increment {j}: KS p={:.4}", ks.p_value)
        })?;
        worst = worst.min(ks.p_value);
    }
    let line_time = start.elapsed();
    ensure(line_time < Duration::from_secs(30), || {
        format!("1D check took {line_time:?}")
    })?;

    for dim in [2usize, 3] {
        let c = unit_ball_volume(dim).unwrap();
        let side = 30f64.powf(1.0 / dim as f64);
        let mut vols = vec![Vec::new(); 5];
        for seed in 0..3000u64 {
            let ps = sample(dim, side, 2.0, 1000 * dim as u64 + seed, Metric::Torus);
            if ps.len() <= 5 {
                continue;
            }
            let t = knn_table(&ps, 5).unwrap();
            for k in 1..=5 {
                vols[k - 1].push(2.0 * c * t.d(0, k).powi(dim as i32));
            }
        }
        for k in 1..=5 {
            let g = Gamma::new(k as f64, 1.0).unwrap();
            let ks = ks_test(&vols[k - 1], |x| g.cdf(x));
            ensure(ks.p_value > 0.01, || {
                format!("torus d={dim} k={k}: KS p={:.4}", ks.p_value)
            })?;
            worst = worst.min(ks.p_value);
        }
    }

    let ps = sample(2, 300.0, 1.0, 77, Metric::Torus);
    let t = knn_table(&ps, 1).unwrap();
    let d1: Vec<f64> = (0..ps.len()).step_by(5).map(|i| t.d(i, 1)).collect();
    let (m, se) = mean_se(&d1);
    ensure((m - 0.5).abs() < 3.0 * se, || {
        format!("E[d1]={m:.5} se={se:.5}")
    })?;
    Ok(format!(
        "1D {} points in {:.1}s; min KS p={worst:.3}; E[d1]={m:.4}±{se:.4}",
        picked.len(),
        line_time.as_secs_f64()
    ))
}

fn criterion_2() -> Check {
    let mut rng = stream(2, 0);
    use rand::Rng;
    let mut edges_checked = 0usize;
    for inst in 0..100u64 {
        let dim = 1 + (inst % 3) as usize;
        let k = 1 + ((inst / 3) % 3) as usize;
        let n: usize = rng.random_range(20..=900);
        let ps = sample(
            dim,
            (n as f64).powf(1.0 / dim as f64),
            1.0,
            derive_seed(20, inst),
            Metric::EuclideanFree,
        );
        if ps.len() <= k || ps.len() > 1000 {
            continue;
        }
        let g = graph(&ps, &AlphaSpec::gn_k(k, 1.0).unwrap());
        let reference = nn_reference_graph(&ps, k).unwrap();
        ensure(g.edges() == reference.edges(), || {
            format!("instance {inst}: GN_k(d,1) != NN reference")
        })?;
        let mut nn = BTreeSet::new();
        let t = knn_table(&ps, k).unwrap();
        for x in 0..ps.len() {
            let sorted = sorted_neighbours(&ps, x);
            ensure(t.distances(x) == &brute_knn(&ps, x, k)[..], || {
                format!("instance {inst}: knn row {x}")
            })?;
            for &(_, y) in sorted.iter().take(k) {
                nn.insert((x.min(y), x.max(y)));
            }
        }
        ensure(edge_set(&g) == nn, || {
            format!("instance {inst}: GN_k(d,1) != brute NN")
        })?;
        edges_checked += nn.len();

        let alpha = AlphaSpec::finite(vec![1.3, 0.0, 0.4]).unwrap();
        if ps.len() > 3 {
            let base = graph(&ps, &alpha);
            for s in [0.1, 3.7] {
                let scaled = graph(&ps.scaled(s).unwrap(), &alpha);
                ensure(base.edges() == scaled.edges(), || {
                    format!("instance {inst}: scale {s} changed the graph")
                })?;
            }
        }

        let a = rng.random_range(0.0..0.999);
        let small = graph(&ps, &AlphaSpec::gn_k(k, a).unwrap());
        ensure((0..ps.len()).all(|x| small.out_degree(x) < k), || {
            format!("instance {inst}: out-degree >= k")
        })?;
        if k == 1 {
            ensure(small.edges().is_empty(), || {
                format!("instance {inst}: GN_1 with α<1 has edges")
            })?;
        } else {
            let big = edge_set(&graph(&ps, &AlphaSpec::gn_k(k - 1, 1.0).unwrap()));
            ensure(edge_set(&small).is_subset(&big), || {
                format!("instance {inst}: domination fails")
            })?;
        }
    }
    Ok(format!("100 instances, {edges_checked} NN edges matched"))
}

fn criterion_3() -> Check {
    let boxes = 1_000_000u64;
    let (hits, n) = banana_frequency(1.0, boxes, 1.0, 3).map_err(|e| e.to_string())?;
    let p = banana_prob(1.0, 2);
    ensure((p - (-9.0f64).exp()).abs() < 1e-18, || {
        "banana_prob(1) != e^-9".into()
    })?;
    let expected = p * n as f64;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    ensure((hits as f64 - expected).abs() <= 3.0 * sigma, || {
        format!("{hits} banana boxes vs {expected:.1} ± {sigma:.1}")
    })?;
    let grid: Vec<f64> = (1..=3000).map(|i| i as f64 / 3000.0).collect();
    for n in [1usize, 6] {
        let best = grid
            .iter()
            .copied()
            .max_by(|a, b| good_box_prob(*a, n).total_cmp(&good_box_prob(*b, n)))
            .unwrap();
        ensure((best - 1.0 / 3.0).abs() < 1e-3, || {
            format!("maximiser {best} for n={n}")
        })?;
    }
    let nt = n_tilde(PC_SITE_RIGOROUS).map_err(|e| e.to_string())?;
    let bound = alpha_bound_2d(PC_SITE_RIGOROUS).map_err(|e| e.to_string())?;
    ensure(nt == 6, || format!("n_tilde={nt}"))?;
    ensure((bound - 40.2492).abs() < 5e-5 && bound < 41.0, || {
        format!("bound={bound}")
    })?;
    Ok(format!(
        "{hits}/{n} banana boxes (expected {expected:.1} ± {sigma:.1}); δ*=1/3; n_tilde={nt} bound={bound:.4} < 41"
    ))
}

fn criterion_4() -> Check {
    let est = estimate_p_unbridged(&PmConfig {
        alpha: AlphaSpec::gn_k(1, 2.0).unwrap(),
        m: 6.25,
        trials: 1000,
        window: 1e4,
        density: 1.0,
        seed: 4,
        level: 0.99,
    })
    .map_err(|e| e.to_string())?;
    ensure(est.ci.lower > 0.0, || format!("{est:?}"))?;
    Ok(format!(
        "p̂(6.25)={:.4}, 99% CI ({:.4}, {:.4}) over {} windows",
        est.ci.p_hat, est.ci.lower, est.ci.upper, est.ci.trials
    ))
}

fn criterion_5() -> Check {
    let mut realisations = 0;
    let ranges = |gamma: f64, side: f64, seed: u64| {
        let alpha = AlphaSpec::geometric(gamma).unwrap();
        let ps = sample(1, side, 1.0, seed, Metric::EuclideanFree)
            .sorted_1d()
            .unwrap();
        let t = knn_table(&ps, choose_kmax(&alpha, 1, 1.0).unwrap()).unwrap();
        (
            ps.coords().to_vec(),
            connection_ranges(&t, &alpha).unwrap().ranges,
        )
    };
    for gamma in [0.3, 0.5] {
        for seed in 0..20 {
            let (x, r) = ranges(gamma, 1e4, seed);
            ensure(shift_monotonicity_check(&x, &r).unwrap(), || {
                format!("shift fails γ={gamma} seed={seed}")
            })?;
            realisations += 1;
        }
    }
    let bound = markov_range_bound(0.5, 3.0).map_err(|e| e.to_string())?;
    let (x, r) = ranges(0.5, 7e5, 3);
    let picked: Vec<f64> = (0..x.len())
        .step_by(60)
        .filter(|&i| x[i] > 100.0 && x[i] < 7e5 - 100.0)
        .map(|i| r[i])
        .collect();
    let n = picked.len() as f64;
    let p = picked.iter().filter(|&&v| v < 3.0).count() as f64 / n;
    let sigma = (p * (1.0 - p) / n).sqrt();
    ensure(p >= bound - 3.0 * sigma, || {
        format!("P(r<3)={p:.4} < {bound:.4} - 3σ")
    })?;
    Ok(format!(
        "shift inequality on {realisations} realisations; P(r<3)={p:.4} ≥ {bound:.4} (n={n})"
    ))
}

fn crossing_spec(a: f64, side: f64, trials: u64) -> ExperimentSpec {
    ExperimentSpec {
        alpha: AlphaSpec::gn_k(1, a).unwrap(),
        dim: 2,
        variant: Variant::ReachUnion,
        side,
        density: 1.0,
        margin: None,
        trials,
        base_seed: 6,
        axis: 0,
        level: 0.95,
    }
}

fn criterion_6() -> Check {
    let mut medians = Vec::new();
    for (j, side) in [1e3, 1e4, 1e5].into_iter().enumerate() {
        let fr: Vec<f64> = (0..15)
            .map(|s| {
                let ps = sample(1, side, 1.0, 1000 * j as u64 + s, Metric::EuclideanFree);
                label_clusters(&graph(&ps, &AlphaSpec::gn_k(1, 2.0).unwrap())).largest_fraction
            })
            .collect();
        medians.push(median(&fr));
    }
    ensure(medians.windows(2).all(|w| w[1] < w[0]), || {
        format!("1D medians {medians:?}")
    })?;

    let res = run_trials(&crossing_spec(45.0, 20.0, 100), None).map_err(|e| e.to_string())?;
    let freq = res.iter().filter(|t| t.crossing).count() as f64 / 100.0;
    ensure(freq >= 0.8, || {
        format!("GN_1(2,45) crossing frequency {freq}")
    })?;

    let b = bisect_critical(&crossing_spec(1.0, 20.0, 200), (1.0, 45.0), 0.5, 0.5, None)
        .map_err(|e| e.to_string())?;
    ensure(b.alpha_hat > 1.0 && b.alpha_hat < 41.0, || {
        format!("α̂={}", b.alpha_hat)
    })?;
    Ok(format!(
        "1D medians {:.4} > {:.4} > {:.4}; GN_1(2,45) crosses {freq:.2}; α̂(L=20)={:.4} in ({:.3}, {:.3})",
        medians[0], medians[1], medians[2], b.alpha_hat, b.lo, b.hi
    ))
}

fn criterion_7() -> Check {
    let mut cis = Vec::new();
    for dim in [2usize, 5, 10, 20, 50] {
        let mut x2 = vec![0.0; dim];
        x2[0] = 1.0;
        let ci = overlap_ratio(
            &vec![0.0; dim],
            &x2,
            1.0,
            1.0,
            1_000_000,
            70 + dim as u64,
            0.99,
        )
        .map_err(|e| e.to_string())?;
        cis.push((dim, ci));
    }
    for w in cis.windows(2) {
        ensure(w[1].1.upper < w[0].1.lower, || {
            format!("overlap CIs not separated: {:?} vs {:?}", w[0], w[1])
        })?;
    }
    let lens = cis[0].1;
    ensure(lens.lower <= 0.39100 && 0.39100 <= lens.upper, || {
        format!("lens CI {lens:?}")
    })?;

    let mut rng = stream(7, 0);
    let n = 20_000;
    let (mut a, mut b, mut aa, mut bb, mut ab) = (vec![], vec![], vec![], vec![], vec![]);
    for _ in 0..n {
        let l = project_l(&uniform_on_sphere(1000, &mut rng)).unwrap();
        a.push(l[0]);
        b.push(l[1]);
        aa.push(l[0] * l[0]);
        bb.push(l[1] * l[1]);
        ab.push(l[0] * l[1]);
    }
    for (name, xs, target) in [
        ("E[L1]", &a, 0.0),
        ("E[L2]", &b, 0.0),
        ("E[L1²]", &aa, 1.0),
        ("E[L2²]", &bb, 1.0),
        ("E[L1L2]", &ab, 0.0),
    ] {
        let (m, se) = mean_se(xs);
        ensure((m - target).abs() < 3.0 * se, || {
            format!("{name}={m:.4} se={se:.4}")
        })?;
    }

    let d1: Vec<f64> = [2usize, 10, 50, 200, 1000]
        .iter()
        .map(|&d| calibrate_delta1(d, 8.0, 20).unwrap())
        .collect();
    ensure(d1.windows(2).all(|w| w[1] < w[0]), || {
        format!("δ₁ not decreasing: {d1:?}")
    })?;
    let ratios: Vec<String> = cis
        .iter()
        .map(|(d, c)| format!("d={d}:{:.4}", c.p_hat))
        .collect();
    Ok(format!(
        "overlap {}; lens CI ({:.5}, {:.5}); δ₁(1000)={:.2e}",
        ratios.join(" "),
        lens.lower,
        lens.upper,
        d1[4]
    ))
}

fn criterion_8() -> Check {
    let alpha = 0.5;
    let p = choose_subsquare_params(alpha, PC_SITE_RIGOROUS).map_err(|e| e.to_string())?;
    ensure(p.n == 11, || format!("n={}", p.n))?;

    let trials = 100u64;
    let (mut good, mut cells, mut crossings) = (0usize, 0usize, 0u64);
    for t in 0..trials {
        let g = subsquare_good_grid_sampled(p.n, p.m, p.density, vec![100, 100], derive_seed(8, t))
            .map_err(|e| e.to_string())?;
        good += g.good_count();
        cells += g.len();
        crossings += u64::from(
            grid_site_percolation(&g, 0)
                .map_err(|e| e.to_string())?
                .crossing,
        );
    }
    let freq = good as f64 / cells as f64;
    ensure(freq > PC_SITE_RIGOROUS, || {
        format!("good frequency {freq:.4}")
    })?;
    let cross = crossings as f64 / trials as f64;
    ensure(cross > 0.9, || format!("grid crossing frequency {cross}"))?;

    // Point-level realisations: goodness from actual points, and every good
    // neighbouring pair has a connected corridor.
    let region = BoxRegion::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
    let (mut pairs, mut good_cells, mut point_cells) = (0, 0, 0);
    for seed in 0..200 {
        let ps = gnperc::geometry::sample_poisson(
            &region,
            p.density,
            derive_seed(80, seed),
            Metric::EuclideanFree,
        )
        .map_err(|e| e.to_string())?;
        let g = subsquare_good_scan(&ps, p.n, p.m, &region).map_err(|e| e.to_string())?;
        good_cells += g.good_count();
        point_cells += g.len();
        if g.good[0] && g.good[1] {
            let rep =
                verify_corridor(&ps, [0.0, 0.0], p.n, p.k, alpha).map_err(|e| e.to_string())?;
            ensure(rep.connected(), || {
                format!("corridor disconnected in realisation {seed}: {rep:?}")
            })?;
            pairs += 1;
        }
    }
    let point_freq = good_cells as f64 / point_cells as f64;
    ensure(point_freq > PC_SITE_RIGOROUS, || {
        format!("point-level good frequency {point_freq:.4}")
    })?;
    ensure(pairs > 0, || "no good pairs to check".into())?;
    Ok(format!(
        "n={} λ={:.1} m={} k={}; good {freq:.4} (points {point_freq:.4}) > {PC_SITE_RIGOROUS}; crossing {cross:.2}; {pairs} corridors connected",
        p.n, p.density, p.m, p.k
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        (
            "1 distributional oracles",
            Duration::from_secs(600),
            criterion_1,
        ),
        ("2 structural checks", Duration::from_secs(120), criterion_2),
        (
            "3 renormalisation constants",
            Duration::from_secs(60),
            criterion_3,
        ),
        ("4 unbridged gaps", Duration::from_secs(300), criterion_4),
        (
            "5 shift and Markov bounds",
            Duration::from_secs(600),
            criterion_5,
        ),
        (
            "6 sub/supercriticality signals",
            Duration::from_secs(1200),
            criterion_6,
        ),
        (
            "7 high-dimensional trends",
            Duration::from_secs(600),
            criterion_7,
        ),
        (
            "8 subsquare construction",
            Duration::from_secs(600),
            criterion_8,
        ),
    ];
    let mut failed = 0;
    for (name, budget, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panic: {msg}"))
        });
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(_) if took > budget => Err(format!("took {took:.1?}, budget {budget:?}")),
            o => o,
        };
        match outcome {
            Ok(detail) => println!(
                "PASS criterion {name} ({:.1}s): {detail}",
                took.as_secs_f64()
            ),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} ({:.1}s): {why}", took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
