mod common;

use std::collections::BTreeSet;

use common::{brute_edges, brute_ranges, dist, sample, sorted_neighbours};
use gnperc::geometry::{knn_table, Metric, PointSet};
use gnperc::gnmodel::{
    build_graph, choose_kmax, connection_ranges, expected_range, expected_range_1d, laplace_v,
    nn_reference_graph, AlphaSpec, GNGraph, Variant,
};
use gnperc::stats::mean_se;
use proptest::prelude::*;

fn graph(ps: &PointSet, alpha: &AlphaSpec, variant: Variant) -> GNGraph {
    let t = knn_table(ps, choose_kmax(alpha, ps.dim(), ps.density()).unwrap()).unwrap();
    build_graph(ps, &connection_ranges(&t, alpha).unwrap(), variant).unwrap()
}

fn edge_set(g: &GNGraph) -> BTreeSet<(usize, usize)> {
    g.edges().iter().copied().collect()
}

fn metric(torus: bool) -> Metric {
    if torus {
        Metric::Torus
    } else {
        Metric::EuclideanFree
    }
}

fn window(dim: usize, n: usize) -> f64 {
    (n as f64).powf(1.0 / dim as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn graph_equals_all_pairs_oracle(
        seed in any::<u64>(),
        dim in 1usize..=3,
        torus in any::<bool>(),
        head in prop::collection::vec(0.0f64..2.0, 1..4),
        overlap in any::<bool>(),
        n in 10usize..400,
    ) {
        let ps = sample(dim, window(dim, n), 1.0, seed, metric(torus));
        prop_assume!(ps.len() > head.len());
        let alpha = AlphaSpec::finite(head.clone()).unwrap();
        let variant = if overlap { Variant::BooleanOverlap } else { Variant::ReachUnion };
        let g = graph(&ps, &alpha, variant);
        let r = brute_ranges(&ps, &head);
        prop_assert_eq!(edge_set(&g), brute_edges(&ps, &r, variant));
        for (x, &rx) in r.iter().enumerate() {
            let reach: Vec<usize> = (0..ps.len()).filter(|&y| y != x && dist(&ps, x, y) <= rx).collect();
            prop_assert_eq!(g.reach(x), &reach[..]);
        }
    }

    #[test]
    fn gn_k_unit_weight_is_nn(seed in any::<u64>(), dim in 1usize..=3, k in 1usize..=3, n in 10usize..1000) {
        let ps = sample(dim, window(dim, n), 1.0, seed, Metric::EuclideanFree);
        prop_assume!(ps.len() > k);
        let g = graph(&ps, &AlphaSpec::gn_k(k, 1.0).unwrap(), Variant::ReachUnion);
        let reference = nn_reference_graph(&ps, k).unwrap();
        prop_assert_eq!(g.edges(), reference.edges());
        // Second, fully independent oracle: union of k-nearest relations.
        let mut nn = BTreeSet::new();
        for x in 0..ps.len() {
            for (_, y) in sorted_neighbours(&ps, x).into_iter().take(k) {
                nn.insert((x.min(y), x.max(y)));
            }
        }
        prop_assert_eq!(edge_set(&g), nn);
    }

    #[test]
    fn scale_invariance(seed in any::<u64>(), dim in 1usize..=3, s in prop::sample::select(vec![0.1, 3.7, 0.5, 12.0]), a in 0.5f64..3.0) {
        let ps = sample(dim, window(dim, 300), 1.0, seed, Metric::EuclideanFree);
        prop_assume!(ps.len() > 3);
        let alpha = AlphaSpec::finite(vec![a, 0.0, 0.5]).unwrap();
        for variant in [Variant::ReachUnion, Variant::BooleanOverlap] {
            let g = graph(&ps, &alpha, variant);
            let h = graph(&ps.scaled(s).unwrap(), &alpha, variant);
            prop_assert_eq!(g.edges(), h.edges());
            for x in 0..ps.len() {
                prop_assert_eq!(g.reach(x), h.reach(x));
            }
        }
    }

    #[test]
    fn domination_by_smaller_nn_graph(seed in any::<u64>(), dim in 1usize..=3, k in 1usize..=5, a in 0.0f64..0.999) {
        let ps = sample(dim, window(dim, 400), 1.0, seed, Metric::EuclideanFree);
        prop_assume!(ps.len() > k);
        let g = graph(&ps, &AlphaSpec::gn_k(k, a).unwrap(), Variant::ReachUnion);
        for x in 0..ps.len() {
            prop_assert!(g.out_degree(x) < k);
        }
        if k == 1 {
            prop_assert!(g.edges().is_empty());
        } else {
            let big = edge_set(&graph(&ps, &AlphaSpec::gn_k(k - 1, 1.0).unwrap(), Variant::ReachUnion));
            prop_assert!(edge_set(&g).is_subset(&big));
        }
    }

    #[test]
    fn edges_monotone_in_each_weight(
        seed in any::<u64>(),
        head in prop::collection::vec(0.0f64..1.5, 3),
        i in 0usize..3,
        bump in 0.0f64..1.0,
    ) {
        let ps = sample(2, 15.0, 1.0, seed, Metric::EuclideanFree);
        prop_assume!(ps.len() > 3);
        let mut more = head.clone();
        more[i] += bump;
        for variant in [Variant::ReachUnion, Variant::BooleanOverlap] {
            let lo = edge_set(&graph(&ps, &AlphaSpec::finite(head.clone()).unwrap(), variant));
            let hi = edge_set(&graph(&ps, &AlphaSpec::finite(more.clone()).unwrap(), variant));
            prop_assert!(lo.is_subset(&hi));
        }
    }

    #[test]
    fn union_edges_within_overlap_edges(seed in any::<u64>(), dim in 1usize..=3, a in 0.1f64..3.0) {
        let ps = sample(dim, window(dim, 300), 1.0, seed, Metric::EuclideanFree);
        prop_assume!(ps.len() > 2);
        let alpha = AlphaSpec::finite(vec![0.0, a]).unwrap();
        let u = edge_set(&graph(&ps, &alpha, Variant::ReachUnion));
        let o = edge_set(&graph(&ps, &alpha, Variant::BooleanOverlap));
        prop_assert!(u.is_subset(&o));
    }

    #[test]
    fn laplace_transform_is_a_decreasing_probability(h in prop::collection::vec(0.0f64..2.0, 1..5), s in 0.0f64..5.0, ds in 0.0f64..5.0) {
        let alpha = AlphaSpec::finite(h).unwrap();
        let a = laplace_v(&alpha, s).unwrap();
        let b = laplace_v(&alpha, s + ds).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-15);
    }
}

/// Mean of `r` over every 11th interior point of a realisation.
fn empirical_mean_range(dim: usize, side: f64, alpha: &AlphaSpec, seed: u64) -> (f64, f64, usize) {
    let ps = sample(dim, side, 1.0, seed, Metric::EuclideanFree);
    let kmax = choose_kmax(alpha, dim, 1.0).unwrap();
    let t = knn_table(&ps, kmax).unwrap();
    let r = connection_ranges(&t, alpha).unwrap();
    let interior = ps.interior_mask(gnperc::geometry::default_margin(kmax, 1.0, dim).unwrap());
    let sample: Vec<f64> = (0..ps.len())
        .step_by(11)
        .filter(|&i| interior[i])
        .map(|i| r.ranges[i])
        .collect();
    let (m, se) = mean_se(&sample);
    (m, se, sample.len())
}

#[test]
fn mean_range_one_dimension() {
    let cases = [
        (AlphaSpec::gn_k(1, 1.0).unwrap(), 0.5),
        (AlphaSpec::finite(vec![1.0, 0.5]).unwrap(), 1.0),
        (AlphaSpec::geometric(0.5).unwrap(), 1.0),
    ];
    for (i, (alpha, expected)) in cases.iter().enumerate() {
        assert_eq!(expected_range_1d(alpha).finite(), Some(*expected));
        let (m, se, n) = empirical_mean_range(1, 1.2e6, alpha, 100 + i as u64);
        assert!(n >= 100_000, "{n}");
        assert!(
            (m - expected).abs() < 3.0 * se,
            "{alpha:?}: {m} vs {expected} (se {se})"
        );
    }
}

#[test]
fn mean_range_gamma_moment_formula() {
    for dim in [2usize, 3] {
        let alpha = AlphaSpec::finite(vec![1.0, 0.5, 0.25]).unwrap();
        let expected = expected_range(&alpha, dim, 1.0).unwrap().finite().unwrap();
        // Independent evaluation of Σ α_i Γ(i + 1/d)/Γ(i) (λ c(d))^{-1/d}.
        let c = gnperc::geometry::unit_ball_volume(dim).unwrap();
        let a = 1.0 / dim as f64;
        let g = |i: f64| statrs::function::gamma::gamma(i + a) / statrs::function::gamma::gamma(i);
        let direct = (1.0 * g(1.0) + 0.5 * g(2.0) + 0.25 * g(3.0)) * c.powf(-a);
        assert!((expected - direct).abs() < 1e-12);
        let side = if dim == 2 { 700.0 } else { 80.0 };
        let (m, se, n) = empirical_mean_range(dim, side, &alpha, 7 + dim as u64);
        assert!(n > 20_000, "{n}");
        assert!(
            (m - expected).abs() < 3.0 * se,
            "d={dim}: {m} vs {expected} (se {se})"
        );
    }
}
