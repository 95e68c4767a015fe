#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kong_core::classifier::{train, SparseRow, TrainOptions};
use kong_core::feature::{exact_pairwise_kernel, graph_feature_map, FeatureConfig, FeatureVector};
use kong_core::generate::{random_dataset, random_graph, random_graph_exact, RandomGraphSpec};
use kong_core::graph::temporal::{parse_temporal_edge_list, write_temporal_edge_list};
use kong_core::kgram::{
    concat_summaries, count_kgrams, exact_base_kernel, new_kgram_count, Boundary, ExactSpace, KGramVector, KernelKind,
    StringSummary,
};
use kong_core::sketch::CountSketch;
use kong_core::traversal::{explicit_strings, run_csgt, SummaryCombiner, TraversalKind, DEFAULT_LENGTH_CAP};
use kong_core::{shuffle_neighborhoods, Graph, Label};

fn graph_from_seed(seed: u64) -> Graph {
    random_graph(&mut ChaCha8Rng::seed_from_u64(seed), &RandomGraphSpec::default()).unwrap()
}

fn small_graph_from_seed(seed: u64) -> Graph {
    let spec = RandomGraphSpec {
        max_nodes: 12,
        max_edges: 30,
        alphabet: 4,
    };
    random_graph(&mut ChaCha8Rng::seed_from_u64(seed), &spec).unwrap()
}

fn kinds() -> impl Strategy<Value = TraversalKind> {
    prop_oneof![Just(TraversalKind::Bfs), Just(TraversalKind::Wl)]
}

/// Straight recursion over explicit token vectors.
fn naive_strings(g: &Graph, kind: TraversalKind, h: usize) -> Vec<Vec<Vec<Label>>> {
    let mut levels = vec![g.labels().iter().map(|&l| vec![l]).collect::<Vec<_>>()];
    for i in 1..=h {
        let prev = &levels[i - 1];
        let next = (0..g.node_count())
            .map(|v| {
                let mut s = Vec::new();
                if kind == TraversalKind::Wl {
                    s.push(g.label(v));
                }
                for &u in g.neighbors(v) {
                    s.extend_from_slice(&prev[u]);
                }
                s
            })
            .collect();
        levels.push(next);
    }
    levels
}

fn sparse(map: &kong_core::FeatureMap) -> &KGramVector {
    match &map.vector {
        FeatureVector::Sparse(v) => v,
        other => panic!("expected a sparse map, got {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn summaries_are_sound(
        parts in prop::collection::vec(prop::collection::vec(0u32..3, 0..8), 0..7),
        k in 1usize..=5,
    ) {
        let parts: Vec<Vec<Label>> = parts.into_iter().map(|p| p.into_iter().map(Label).collect()).collect();
        let summaries: Vec<StringSummary<KGramVector>> =
            parts.iter().map(|p| StringSummary::exact(p, k).unwrap()).collect();
        let refs: Vec<&StringSummary<KGramVector>> = summaries.iter().collect();
        let joined: Vec<Label> = parts.concat();
        let summary = concat_summaries(&refs, k).unwrap();
        prop_assert_eq!(&summary.payload, &count_kgrams(&joined, k).unwrap());
        prop_assert_eq!(&summary.boundary, &Boundary::from_tokens(&joined, k));

        let created = new_kgram_count(&refs, k).unwrap();
        let grams = |n: usize| (n + 1).saturating_sub(k) as u64;
        let expected = grams(joined.len()) - parts.iter().map(|p| grams(p.len())).sum::<u64>();
        prop_assert_eq!(created, expected);
        let junctions = parts.len().saturating_sub(1) as u64;
        prop_assert!(created <= (k as u64 - 1) * junctions);
    }

    #[test]
    fn traversal_matches_recursion(seed in any::<u64>(), kind in kinds(), h in 0usize..=3) {
        let g = graph_from_seed(seed);
        let strings = explicit_strings(&g, kind, h, DEFAULT_LENGTH_CAP).unwrap();
        let naive = naive_strings(&g, kind, h);
        prop_assert_eq!(&strings.iterations, &naive);
        let finals: Vec<Vec<Label>> = (0..g.node_count())
            .map(|v| match kind {
                TraversalKind::Bfs => naive.iter().flat_map(|level| level[v].clone()).collect(),
                TraversalKind::Wl => naive[h][v].clone(),
            })
            .collect();
        prop_assert_eq!(strings.finals, finals);
    }

    #[test]
    fn bfs_lengths_count_walks(seed in any::<u64>(), h in 0usize..=3) {
        let g = graph_from_seed(seed);
        let strings = explicit_strings(&g, TraversalKind::Bfs, h, DEFAULT_LENGTH_CAP).unwrap();
        // walks[v] = number of walks of length i starting at v
        let mut walks = vec![1u64; g.node_count()];
        for i in 0..=h {
            for v in 0..g.node_count() {
                prop_assert_eq!(strings.iterations[i][v].len() as u64, walks[v]);
            }
            walks = (0..g.node_count())
                .map(|v| g.neighbors(v).iter().map(|&u| walks[u]).sum())
                .collect();
        }
    }

    #[test]
    fn strings_follow_node_renumbering(seed in any::<u64>(), kind in kinds(), h in 0usize..=3) {
        let g = graph_from_seed(seed);
        let mut perm: Vec<usize> = (0..g.node_count()).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let permuted = g.permute_nodes(&perm).unwrap();
        let a = explicit_strings(&g, kind, h, DEFAULT_LENGTH_CAP).unwrap();
        let b = explicit_strings(&permuted, kind, h, DEFAULT_LENGTH_CAP).unwrap();
        for v in 0..g.node_count() {
            prop_assert_eq!(&a.finals[v], &b.finals[perm[v]]);
        }
    }

    #[test]
    fn junction_and_state_bounds(seed in any::<u64>(), kind in kinds(), h in 0usize..=3, k in 1usize..=4) {
        let g = graph_from_seed(seed);
        let space = ExactSpace { k };
        let combiner = SummaryCombiner::new(&space, k).unwrap();
        let keep = k as u64 - 1;
        let mut state_ok = true;
        let state_bound: u64 = (0..g.node_count())
            .map(|v| 2 * keep * (g.neighbors(v).len() as u64 + 1))
            .sum();
        run_csgt(&g, kind, h, &combiner, |_, items| {
            let stored: u64 = items.iter().map(|s| s.boundary.stored_tokens() as u64).sum();
            state_ok &= stored <= state_bound;
        })
        .unwrap();
        prop_assert!(state_ok);
        let per_iteration: u64 = (0..g.node_count())
            .map(|v| {
                let parts = g.neighbors(v).len() as u64 + u64::from(kind == TraversalKind::Wl);
                keep * parts.saturating_sub(1)
            })
            .sum();
        prop_assert!(combiner.step_kgrams() <= per_iteration * h as u64);
        prop_assert!(combiner.append_kgrams() <= keep * (g.node_count() * h) as u64);
    }

    #[test]
    fn exact_maps_match_explicit_strings(seed in any::<u64>(), kind in kinds(), h in 0usize..=3, k in 1usize..=4) {
        let g = graph_from_seed(seed);
        let cfg = FeatureConfig { traversal: kind, h, k, ..FeatureConfig::default() };
        let map = graph_feature_map(&g, &cfg).unwrap();
        let mut expected = KGramVector::new(k);
        for s in explicit_strings(&g, kind, h, DEFAULT_LENGTH_CAP).unwrap().finals {
            expected.add_vector(&count_kgrams(&s, k).unwrap());
        }
        prop_assert_eq!(sparse(&map), &expected);
    }

    #[test]
    fn maps_ignore_node_numbering(seed in any::<u64>(), kind in kinds(), cosine in any::<bool>(), p in 1u32..=2) {
        let g = small_graph_from_seed(seed);
        let mut perm: Vec<usize> = (0..g.node_count()).collect();
        use rand::seq::SliceRandom;
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 7));
        let permuted = g.permute_nodes(&perm).unwrap();
        let kernel = if cosine { KernelKind::Cosine } else { KernelKind::Poly };
        let exact = FeatureConfig { traversal: kind, kernel, p, k: 2, h: 2, ..FeatureConfig::default() };
        prop_assert_eq!(graph_feature_map(&g, &exact).unwrap(), graph_feature_map(&permuted, &exact).unwrap());
        let sketched = exact.clone().sketched(64, seed);
        prop_assert_eq!(graph_feature_map(&g, &sketched).unwrap(), graph_feature_map(&permuted, &sketched).unwrap());
    }

    #[test]
    fn maps_add_over_disjoint_unions(a in any::<u64>(), b in any::<u64>(), kind in kinds(), p in 1u32..=2) {
        let (g, h) = (small_graph_from_seed(a), small_graph_from_seed(b));
        let union = Graph::disjoint_union(&[g.clone(), h.clone()]);
        let exact = FeatureConfig { traversal: kind, k: 2, h: 2, ..FeatureConfig::default() };
        let (gm, hm) = (graph_feature_map(&g, &exact).unwrap(), graph_feature_map(&h, &exact).unwrap());
        let mut sum = sparse(&gm).clone();
        sum.add_vector(sparse(&hm));
        let um = graph_feature_map(&union, &exact).unwrap();
        prop_assert_eq!(sparse(&um), &sum);

        let sketched = FeatureConfig { p, ..exact }.sketched(64, 5);
        let dense = |graph: &Graph| match graph_feature_map(graph, &sketched).unwrap().vector {
            FeatureVector::Dense(s) => s,
            _ => unreachable!(),
        };
        let mut parts = dense(&g);
        parts.merge(&dense(&h)).unwrap();
        let whole = dense(&union);
        for (x, y) in whole.data().iter().zip(parts.data()) {
            if p == 1 {
                prop_assert_eq!(x, y);
            } else {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn base_kernel_ranges(
        x in prop::collection::vec((0u32..6, 0u32..5), 0..10),
        y in prop::collection::vec((0u32..6, 0u32..5), 0..10),
        p in 1u32..=4,
    ) {
        let vector = |entries: &[(u32, u32)]| {
            let mut v = KGramVector::new(1);
            for &(t, w) in entries {
                v.add(&[Label(t)], w as f64);
            }
            v
        };
        let (x, y) = (vector(&x), vector(&y));
        let cos = exact_base_kernel(&x, &y, KernelKind::Cosine, p, 0.0).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&cos));
        let poly = exact_base_kernel(&x, &y, KernelKind::Poly, 2 * p, 0.0).unwrap();
        prop_assert!(poly >= 0.0);
    }

    #[test]
    fn count_sketch_is_linear(
        items in prop::collection::vec((0u32..50, -5i32..=5), 1..40),
        seed in any::<u64>(),
        split in 0usize..40,
    ) {
        let split = split.min(items.len());
        let mut whole = CountSketch::new(32, 3, seed).unwrap();
        let mut reversed = CountSketch::new(32, 3, seed).unwrap();
        let mut left = CountSketch::new(32, 3, seed).unwrap();
        let mut right = CountSketch::new(32, 3, seed).unwrap();
        for &(t, w) in &items {
            whole.add(&[Label(t)], w as f64);
        }
        for &(t, w) in items.iter().rev() {
            reversed.add(&[Label(t)], w as f64);
        }
        for &(t, w) in &items[..split] {
            left.add(&[Label(t)], w as f64);
        }
        for &(t, w) in &items[split..] {
            right.add(&[Label(t)], w as f64);
        }
        left.merge(&right).unwrap();
        prop_assert_eq!(whole.table(), reversed.table());
        prop_assert_eq!(whole.table(), left.table());
    }

    #[test]
    fn temporal_format_round_trips(seed in any::<u64>(), graphs in 1usize..6) {
        let ds = random_dataset(seed, graphs, &RandomGraphSpec { max_nodes: 10, max_edges: 25, alphabet: 4 }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (e, l, c) = (dir.path().join("e.csv"), dir.path().join("l.csv"), dir.path().join("c.csv"));
        write_temporal_edge_list(&ds, &e, &l, Some(&c)).unwrap();
        let back = parse_temporal_edge_list(&e, &l, Some(&c)).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn shuffling_keeps_neighbor_multisets(seed in any::<u64>(), shuffle in any::<u64>()) {
        let g = graph_from_seed(seed);
        let s = shuffle_neighborhoods(&g, shuffle);
        prop_assert_eq!(s.node_count(), g.node_count());
        prop_assert_eq!(s.edge_count(), g.edge_count());
        prop_assert_eq!(s.labels(), g.labels());
        for v in 0..g.node_count() {
            let mut a = g.neighbors(v).to_vec();
            let mut b = s.neighbors(v).to_vec();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }
    }
}

#[test]
fn count_sketch_rows_are_unbiased() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut x = KGramVector::new(1);
    let mut y = KGramVector::new(1);
    for t in 0..300u32 {
        x.add(&[Label(t)], rng.gen_range(-3.0..3.0));
        if t % 2 == 0 {
            y.add(&[Label(t)], rng.gen_range(-3.0..3.0));
        }
    }
    let truth = x.dot(&y);
    let estimates: Vec<f64> = (0..400u64)
        .flat_map(|seed| {
            let mut a = CountSketch::new(64, 3, seed).unwrap();
            let mut b = CountSketch::new(64, 3, seed).unwrap();
            a.feed(&x);
            b.feed(&y);
            a.row_dots(&b).unwrap()
        })
        .collect();
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let standard_error = (var / n).sqrt();
    assert!(
        (mean - truth).abs() <= 2.0 * standard_error,
        "mean {mean}, truth {truth}, se {standard_error}"
    );
}

#[test]
fn sketch_error_shrinks_with_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g = random_graph_exact(&mut rng, 30, 90, 8).unwrap();
    let h = random_graph_exact(&mut rng, 30, 90, 8).unwrap();
    let base = FeatureConfig {
        kernel: KernelKind::Cosine,
        k: 3,
        h: 2,
        ..FeatureConfig::default()
    };
    let exact = exact_pairwise_kernel(&g, &h, &base).unwrap();
    let mut medians = Vec::new();
    for width in [256, 1024, 4096] {
        let mut errors: Vec<f64> = (0..100u64)
            .map(|seed| {
                let cfg = base.clone().sketched(width, seed);
                let a = graph_feature_map(&g, &cfg).unwrap();
                let b = graph_feature_map(&h, &cfg).unwrap();
                (a.dot(&b).unwrap() - exact).abs()
            })
            .collect();
        errors.sort_by(f64::total_cmp);
        medians.push(errors[50]);
    }
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

#[test]
fn classifier_tolerates_common_scaling() {
    // well-separated data: scaling features by s and C by 1/s^2 keeps decisions
    let x: Vec<SparseRow> = (0..40)
        .map(|i| {
            let side = if i % 2 == 0 { 1.0 } else { -1.0 };
            vec![(0, side * (2.0 + (i as f64 * 0.3).sin())), (1, (i as f64 * 0.7).cos())]
        })
        .collect();
    let y: Vec<i64> = (0..40).map(|i| (i % 2) as i64).collect();
    let opts = TrainOptions {
        c: 1.0,
        epochs: 1000,
        tolerance: 1e-6,
        seed: 4,
    };
    let a = train(&x, &y, 2, &opts).unwrap();
    let s = 10.0;
    let scaled: Vec<SparseRow> = x.iter().map(|r| r.iter().map(|&(j, v)| (j, v * s)).collect()).collect();
    let b = train(
        &scaled,
        &y,
        2,
        &TrainOptions {
            c: opts.c / (s * s),
            ..opts
        },
    )
    .unwrap();
    for (row, srow) in x.iter().zip(&scaled) {
        assert_eq!(a.predict(row), b.predict(srow));
    }
}

#[test]
fn seeds_fix_models_and_sketches() {
    let g = graph_from_seed(5);
    let cfg = FeatureConfig {
        p: 2,
        ..FeatureConfig::default()
    }
    .sketched(128, 77);
    assert_eq!(
        graph_feature_map(&g, &cfg).unwrap(),
        graph_feature_map(&g, &cfg).unwrap()
    );
}
