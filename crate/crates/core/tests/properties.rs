use std::collections::HashSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use utmp::classifier::LinearHead;
use utmp::experiment::{run_experiment, Dataset, ExperimentConfig};
use utmp::features::{FeatureMatrix, RandomKind, RowNorm};
use utmp::metrics::summarize;
use utmp::paths::{truncated_series, SeriesKind, SeriesParams};
use utmp::propagation::{inner_product_scores, Variant};
use utmp::{parse_edge_str, roc_auc, sample_negatives, split_edges, Edge, Graph, Operator, Operator32};

fn brute_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for p in pos {
        for n in neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n, 0.0f64..0.6, any::<u64>())
        .prop_map(|(n, p, seed)| Graph::erdos_renyi(n, p, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Scores drawn from a small grid so that ties are frequent.
fn tied_scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0i32..6).prop_map(|x| x as f64 * 0.25), 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn auc_matches_brute_force(pos in tied_scores(), neg in tied_scores()) {
        let fast = roc_auc(&pos, &neg).unwrap();
        prop_assert!((fast - brute_auc(&pos, &neg)).abs() <= 1e-12);
    }

    #[test]
    fn auc_matches_brute_force_continuous(
        pos in prop::collection::vec(-1e3f64..1e3, 1..60),
        neg in prop::collection::vec(-1e3f64..1e3, 1..60),
    ) {
        prop_assert!((roc_auc(&pos, &neg).unwrap() - brute_auc(&pos, &neg)).abs() <= 1e-12);
    }

    #[test]
    fn auc_invariant_under_increasing_maps(pos in tied_scores(), neg in tied_scores()) {
        let f = |x: &f64| (3.0 * x).exp() - 7.0;
        let a = roc_auc(&pos, &neg).unwrap();
        let pos2: Vec<f64> = pos.iter().map(f).collect();
        let neg2: Vec<f64> = neg.iter().map(f).collect();
        prop_assert_eq!(a, roc_auc(&pos2, &neg2).unwrap());
    }

    #[test]
    fn graph_invariants(g in graph_strategy(25)) {
        prop_assert!(g.validate().is_ok());
        let n = g.node_count();
        let degree_sum: usize = (0..n).map(|v| g.degree(v)).sum();
        prop_assert_eq!(degree_sum, 2 * g.edge_count());
        for v in 0..n {
            prop_assert!(g.aug_degree(v) == g.degree(v) + 1);
            prop_assert!(!g.has_edge(v, v));
            prop_assert!(g.neighbors(v).windows(2).all(|w| w[0] < w[1]));
            for &u in g.neighbors(v) {
                prop_assert!(g.neighbors(u).contains(&v));
            }
        }
        let all: Vec<Edge> = g.edges().collect();
        let empty = g.remove_edges(&all).unwrap();
        prop_assert_eq!((0..n).map(|v| empty.degree(v)).sum::<usize>(), 0);
        prop_assert_eq!(g.remove_edges(&[]).unwrap(), g);
    }

    #[test]
    fn edge_list_round_trip(g in graph_strategy(25)) {
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let (back, _) = parse_edge_str(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back.offsets(), g.offsets());
        prop_assert_eq!(back.targets(), g.targets());
        let mut again = Vec::new();
        back.write_edge_list(&mut again).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn split_invariants(g in graph_strategy(30), seed in any::<u64>()) {
        prop_assume!(g.edge_count() >= 4);
        let n = g.node_count();
        let m = g.edge_count();
        let held = (0.10 * m as f64).round() as usize + (0.05 * m as f64).round() as usize;
        prop_assume!(n * (n - 1) / 2 - m >= held);
        let (s, g_train) = split_edges(&g, 0.10, 0.05, seed).unwrap();
        prop_assert_eq!(s.test_pos.len(), (0.10 * m as f64).round() as usize);
        prop_assert_eq!(s.val_pos.len(), (0.05 * m as f64).round() as usize);
        let union: HashSet<Edge> = s.all_positives().collect();
        prop_assert_eq!(union.len(), m);
        prop_assert_eq!(union, g.edges().collect::<HashSet<_>>());
        prop_assert_eq!(s.val_neg.len(), s.val_pos.len());
        prop_assert_eq!(s.test_neg.len(), s.test_pos.len());
        for e in s.val_neg.iter().chain(&s.test_neg) {
            prop_assert!(!e.is_loop() && !g.has_edge(e.u, e.v));
        }
        let vn: HashSet<Edge> = s.val_neg.iter().copied().collect();
        prop_assert!(s.test_neg.iter().all(|e| !vn.contains(e)));
        prop_assert_eq!(vn.len(), s.val_neg.len());
        // leakage: nothing held out survives in the message-passing graph
        for e in s.val_pos.iter().chain(&s.test_pos) {
            prop_assert!(!g_train.has_edge(e.u, e.v));
        }
        for e in &s.train_pos {
            prop_assert!(g_train.has_edge(e.u, e.v));
        }
        prop_assert_eq!(g_train.edge_count(), s.train_pos.len());
    }

    #[test]
    fn negatives_are_distinct_non_edges(g in graph_strategy(20), seed in any::<u64>(), frac in 0.0f64..1.0) {
        let n = g.node_count();
        let available = n * (n - 1) / 2 - g.edge_count();
        let count = (frac * available as f64) as usize;
        let neg = sample_negatives(&g, count, &HashSet::new(), seed).unwrap();
        let uniq: HashSet<Edge> = neg.iter().copied().collect();
        prop_assert_eq!(uniq.len(), count);
        prop_assert!(neg.iter().all(|e| e.u < e.v && !g.has_edge(e.u, e.v)));
        prop_assert!(sample_negatives(&g, available + 1, &HashSet::new(), seed).is_err());
    }

    #[test]
    fn normalization_is_idempotent(
        rows in 1usize..8,
        cols in 1usize..8,
        seed in any::<u64>(),
        zero_row in any::<bool>(),
    ) {
        let mut f = FeatureMatrix::<f64>::random(rows, cols, RandomKind::Gaussian, seed).unwrap();
        if zero_row {
            let mut vals = f.values().to_vec();
            vals[..cols].iter_mut().for_each(|x| *x = 0.0);
            f = FeatureMatrix::new(rows, cols, vals).unwrap();
        }
        for scheme in [RowNorm::L1, RowNorm::L2, RowNorm::None] {
            let once = f.normalize_rows(scheme);
            let twice = once.normalize_rows(scheme);
            for (a, b) in once.values().iter().zip(twice.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            if zero_row {
                prop_assert!(once.row(0).iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn sage_rows_sum_to_one(g in graph_strategy(30)) {
        let op = Operator::build(&g, Variant::Sage, 0.0);
        for s in op.row_sums() {
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
        prop_assert!(Operator::build(&g, Variant::Gcn, 0.0).is_symmetric());
        prop_assert!(Operator::build(&g, Variant::Gin, 0.0).is_symmetric());
    }

    #[test]
    fn propagation_is_associative(g in graph_strategy(20), l in 1usize..5) {
        let h = FeatureMatrix::<f64>::one_hot(g.node_count());
        for v in Variant::ALL {
            let op = Operator::build(&g, v, 0.0);
            let direct = op.propagate(&h, l).unwrap();
            let split = op.propagate(&op.propagate(&h, 1).unwrap(), l - 1).unwrap();
            for (a, b) in direct.values().iter().zip(split.values()) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn single_precision_storage_tracks_double(g in graph_strategy(20), l in 0usize..4) {
        let h = FeatureMatrix::<f64>::one_hot(g.node_count());
        let pairs: Vec<(usize, usize)> = g.edges().map(|e| (e.u, e.v)).collect();
        prop_assume!(!pairs.is_empty());
        let d = inner_product_scores(&Operator::build(&g, Variant::Gcn, 0.0).propagate(&h, l).unwrap(), &pairs).unwrap();
        let s = inner_product_scores(&Operator32::build(&g, Variant::Gcn, 0.0).propagate(&h.cast(), l).unwrap(), &pairs).unwrap();
        for (a, b) in d.iter().zip(&s) {
            prop_assert!((a - b).abs() <= 1e-5);
        }
    }

    #[test]
    fn katz_matches_dense_powers(g in graph_strategy(10), gamma in 0.05f64..0.95, len in 1usize..=6) {
        let n = g.node_count();
        let a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if g.has_edge(i, j) { 1.0 } else { 0.0 }).collect()).collect();
        let mut acc = vec![vec![0.0; n]; n];
        let mut p = a.clone();
        for l in 1..=len {
            for i in 0..n {
                for j in 0..n {
                    acc[i][j] += gamma.powi(l as i32) * p[i][j];
                }
            }
            p = (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| p[i][k] * a[k][j]).sum()).collect()).collect();
        }
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).collect();
        let got = truncated_series(&g, SeriesKind::Katz, SeriesParams::new(gamma, len).unwrap(), &pairs).unwrap();
        for (&(u, v), x) in pairs.iter().zip(&got) {
            prop_assert!((x - acc[u][v]).abs() <= 1e-9);
        }
    }

    #[test]
    fn head_scores_are_symmetric_and_scale_quadratically(
        seed in any::<u64>(),
        hidden in 1usize..6,
        c in 0.1f64..5.0,
    ) {
        let z = FeatureMatrix::<f64>::random(6, 4, RandomKind::Gaussian, seed).unwrap();
        let head = LinearHead::<f64>::init_uniform(hidden, 4, false, seed ^ 1).unwrap();
        let fwd: Vec<(usize, usize)> = (0..6).flat_map(|u| (0..6).map(move |v| (u, v))).collect();
        let rev: Vec<(usize, usize)> = fwd.iter().map(|&(u, v)| (v, u)).collect();
        let a = head.score_pairs(&z, &fwd).unwrap();
        prop_assert_eq!(&a, &head.score_pairs(&z, &rev).unwrap());
        let scaled = head.scaled(c).score_pairs(&z, &fwd).unwrap();
        for (x, y) in a.iter().zip(&scaled) {
            prop_assert!((c * c * x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
        let (pos, neg) = a.split_at(18);
        let (spos, sneg) = scaled.split_at(18);
        prop_assert!((roc_auc(pos, neg).unwrap() - roc_auc(spos, sneg).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn identity_head_equals_raw_inner_products_bitwise() {
    let g = Graph::erdos_renyi(20, 0.3, &mut ChaCha8Rng::seed_from_u64(1));
    let h = FeatureMatrix::<f64>::one_hot(20);
    let pairs: Vec<(usize, usize)> = (0..20).flat_map(|u| (0..20).map(move |v| (u, v))).collect();
    for l in 0..3 {
        let z = Operator::build(&g, Variant::Gcn, 0.0).propagate(&h, l).unwrap();
        let raw = inner_product_scores(&z, &pairs).unwrap();
        let head = LinearHead::<f64>::identity(20).score_pairs(&z, &pairs).unwrap();
        assert_eq!(raw, head);
    }
}

#[test]
fn propagation_independent_of_thread_count() {
    let g = Graph::erdos_renyi(300, 0.05, &mut ChaCha8Rng::seed_from_u64(2));
    let h = FeatureMatrix::<f64>::one_hot(300);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| Operator::build(&g, Variant::Sage, 0.0).propagate(&h, 3).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn experiment_summary_recomputes() {
    let g = Graph::erdos_renyi(80, 0.1, &mut ChaCha8Rng::seed_from_u64(3));
    let ds = Dataset::new("er", g);
    let cfg = ExperimentConfig {
        runs: 5,
        seed: 11,
        ..Default::default()
    };
    let res = run_experiment(&ds, &cfg).unwrap();
    let s = summarize(&res.per_run_auc);
    assert_eq!(res.per_run_auc.len(), 5);
    assert_eq!((res.mean, res.std, res.std_sample), (s.mean, s.std, s.std_sample));
    assert!(res.per_run_auc.iter().all(|a| (0.0..=1.0).contains(a)));
}
