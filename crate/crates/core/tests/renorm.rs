mod common;

use std::collections::HashMap;

use common::sample;
use gnperc::geometry::{knn_table, BoxRegion, Metric, PointSet};
use gnperc::gnmodel::{build_graph, connection_ranges, AlphaSpec, Variant};
use gnperc::renorm::{
    alpha_bound_2d, banana_frequency, banana_prob, banana_scan, choose_subsquare_params,
    good_box_prob, grid_site_percolation, n_tilde, subsquare_good_grid_sampled,
    subsquare_good_scan, verify_corridor, GoodBoxGrid, PC_SITE_RIGOROUS,
};

fn sigma(p: f64, n: f64) -> f64 {
    (p * (1.0 - p) / n).sqrt()
}

#[test]
fn banana_frequency_matches_poisson_oracle() {
    for (delta, boxes) in [(1.0 / 3.0, 100_000u64), (0.5, 100_000), (0.2, 100_000)] {
        let (hits, n) = banana_frequency(delta, boxes, 1.0, 17).unwrap();
        // P(exactly one point in the 3δ box) · P(it lands in the central δ box).
        let mean = 9.0 * delta * delta;
        let p = mean * (-mean).exp() / 9.0;
        assert!((p - banana_prob(delta, 2)).abs() < 1e-15);
        let f = hits as f64 / n as f64;
        assert!(
            (f - p).abs() < 3.0 * sigma(p, n as f64),
            "δ={delta}: {f} vs {p}"
        );
    }
}

#[test]
fn neighbouring_banana_cells_are_independent() {
    let delta = 1.0 / 3.0;
    let len = 200_000usize;
    let region = BoxRegion::new(vec![0.0, 0.0], vec![len as f64, 1.0]).unwrap();
    let ps = gnperc::geometry::sample_poisson(&region, 1.0, 5, Metric::EuclideanFree).unwrap();
    let g = banana_scan(&ps, delta, 1, &region).unwrap();
    let pairs = len - 1;
    let both = (0..pairs).filter(|&i| g.good[i] && g.good[i + 1]).count() as f64 / pairs as f64;
    let p = g.good_fraction();
    assert!(
        (both - p * p).abs() < 3.0 * sigma(p * p, pairs as f64 / 2.0),
        "{both} vs {}",
        p * p
    );
}

#[test]
fn one_third_maximises_good_box_probability() {
    for n in [1usize, 3, 6] {
        let best = (1..=2000)
            .map(|i| i as f64 * 5e-4)
            .max_by(|a, b| good_box_prob(*a, n).total_cmp(&good_box_prob(*b, n)))
            .unwrap();
        assert!((best - 1.0 / 3.0).abs() < 1e-3, "n={n}: {best}");
    }
}

#[test]
fn n_tilde_is_the_smallest_sufficient_size() {
    for pc in [0.5, PC_SITE_RIGOROUS, 0.9, 0.59] {
        let n = n_tilde(pc).unwrap();
        assert!(good_box_prob(1.0 / 3.0, n) >= pc);
        assert!(n == 1 || good_box_prob(1.0 / 3.0, n - 1) < pc, "pc={pc}");
    }
    assert_eq!(n_tilde(0.59).unwrap(), 5);
    assert_eq!(n_tilde(PC_SITE_RIGOROUS).unwrap(), 6);
    assert!((alpha_bound_2d(PC_SITE_RIGOROUS).unwrap() - 40.2492).abs() < 1e-4);
}

#[test]
fn dense_subsquares_are_almost_always_good() {
    let (n, m, density) = (5, 5000.0, 200.0);
    // Cap 200 per subsquare is never reached at mean 8; only emptiness matters.
    let exact = (1.0 - (-8.0f64).exp()).powi(25);
    let g = subsquare_good_grid_sampled(n, m, density, vec![320, 320], 3).unwrap();
    assert!(g.good_fraction() > 0.99, "{}", g.good_fraction());

    let region = BoxRegion::cube(2, 0.0, 100.0).unwrap();
    let ps = gnperc::geometry::sample_poisson(&region, density, 4, Metric::EuclideanFree).unwrap();
    let g = subsquare_good_scan(&ps, n, m, &region).unwrap();
    assert_eq!(g.len(), 10_000);
    let f = g.good_fraction();
    assert!(
        (f - exact).abs() < 3.0 * sigma(exact, 1e4),
        "{f} vs {exact}"
    );
}

#[test]
fn bernoulli_grid_above_threshold_crosses() {
    let hits = (0..200)
        .filter(|&s| {
            let g = GoodBoxGrid::bernoulli(vec![100, 100], 0.78, s).unwrap();
            grid_site_percolation(&g, 0).unwrap().crossing
        })
        .count();
    assert!(hits as f64 / 200.0 > 0.95, "{hits}/200");
}

#[test]
fn good_neighbouring_squares_have_connected_corridors() {
    for alpha in [0.5, 1.5] {
        let p = choose_subsquare_params(alpha, PC_SITE_RIGOROUS).unwrap();
        let region = BoxRegion::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let mut checked = 0;
        for seed in 0..40 {
            let ps =
                gnperc::geometry::sample_poisson(&region, p.density, seed, Metric::EuclideanFree)
                    .unwrap();
            let g = subsquare_good_scan(&ps, p.n, p.m, &region).unwrap();
            if !(g.good[0] && g.good[1]) {
                continue;
            }
            checked += 1;
            let rep = verify_corridor(&ps, [0.0, 0.0], p.n, p.k, alpha).unwrap();
            assert!(rep.connected(), "α={alpha} seed={seed}: {rep:?}");
            assert!(rep.max_neighbour_distance <= rep.min_certified_range);
        }
        assert!(checked >= 25, "α={alpha}: only {checked} good pairs");
    }
}

/// Index of the point that makes each `3δ` sub-box a banana box, recomputed
/// from scratch.
fn banana_points(ps: &PointSet, delta: f64) -> HashMap<(i64, i64), usize> {
    let s = 3.0 * delta;
    let mut boxes: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for i in 0..ps.len() {
        let p = ps.point(i);
        boxes
            .entry(((p[0] / s).floor() as i64, (p[1] / s).floor() as i64))
            .or_default()
            .push(i);
    }
    boxes
        .into_iter()
        .filter_map(|(b, v)| {
            let p = ps.point(v[0]);
            let central = (0..2).all(|a| {
                let off = p[a] - [b.0, b.1][a] as f64 * s;
                off >= delta && off < 2.0 * delta
            });
            (v.len() == 1 && central).then_some((b, v[0]))
        })
        .collect()
}

#[test]
fn banana_points_of_adjacent_good_cells_are_joined() {
    let (delta, n) = (1.0 / 3.0, 6usize);
    let alpha = AlphaSpec::gn_k(1, 41.0).unwrap();
    let mut pairs = 0;
    for seed in 0..5 {
        let ps = sample(2, 60.0, 1.0, 900 + seed, Metric::EuclideanFree);
        let region = BoxRegion::cube(2, 0.0, 60.0).unwrap();
        let grid = banana_scan(&ps, delta, n, &region).unwrap();
        let bananas = banana_points(&ps, delta);
        let mut by_cell: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (&(bx, by), &i) in &bananas {
            by_cell
                .entry((bx / n as i64, by / n as i64))
                .or_default()
                .push(i);
        }
        for c in 0..grid.len() {
            let xy = grid.cell_coords(c);
            assert_eq!(
                grid.good[c],
                by_cell.contains_key(&(xy[0] as i64, xy[1] as i64))
            );
        }
        let t = knn_table(&ps, 1).unwrap();
        let g = build_graph(
            &ps,
            &connection_ranges(&t, &alpha).unwrap(),
            Variant::ReachUnion,
        )
        .unwrap();
        let edges: std::collections::HashSet<(usize, usize)> = g.edges().iter().copied().collect();
        for (&(cx, cy), us) in &by_cell {
            for nb in [(cx + 1, cy), (cx, cy + 1)] {
                for &u in us {
                    for &v in by_cell.get(&nb).into_iter().flatten() {
                        assert!(
                            edges.contains(&(u.min(v), u.max(v))),
                            "seed={seed}: {u}-{v}"
                        );
                        pairs += 1;
                    }
                }
            }
        }
    }
    assert!(pairs > 100, "{pairs}");
}
