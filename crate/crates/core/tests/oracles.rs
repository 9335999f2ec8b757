//! Dense-matrix oracles, built straight from adjacency queries, checked
//! against the sparse propagation, walk and series code.

use approx::assert_abs_diff_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use utmp::features::FeatureMatrix;
use utmp::paths::{
    count_paths, enumerate_paths, meeting_probability, neighborhood_heuristics, oracle_inner_product, triadic_measures,
    truncated_series, walk_probability, DegreeConvention, SeriesKind, SeriesParams, DEFAULT_PATH_BUDGET,
};
use utmp::propagation::{inner_product_scores, PropagationOperator, Variant};
use utmp::{parse_edge_str, Graph, Operator};

type Mat = Vec<Vec<f64>>;

fn identity(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| (0..m).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

fn power(a: &Mat, p: usize) -> Mat {
    (0..p).fold(identity(a.len()), |acc, _| matmul(&acc, a))
}

fn adjacency(g: &Graph, loops: bool) -> Mat {
    let n = g.node_count();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if (loops && i == j) || g.has_edge(i, j) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// `S` from its closed form on dense `Ã` and `D̃`.
fn dense_operator(g: &Graph, variant: Variant) -> Mat {
    let a = adjacency(g, true);
    let d: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match variant {
                    Variant::Gcn => a[i][j] / (d[i] * d[j]).sqrt(),
                    Variant::Sage => a[i][j] / d[i],
                    Variant::Gin => a[i][j],
                })
                .collect()
        })
        .collect()
}

fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    Graph::erdos_renyi(n, p, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn k3() -> Graph {
    parse_edge_str("0 1\n1 2\n2 0\n").unwrap().0
}

fn p2() -> Graph {
    parse_edge_str("0 1\n").unwrap().0
}

#[test]
fn operators_match_closed_forms() {
    for seed in 0..20 {
        let g = random_graph(12, 0.25, seed);
        for v in Variant::ALL {
            let op = Operator::build(&g, v, 0.0);
            let dense = dense_operator(&g, v);
            for (a, b) in op.to_dense().iter().flatten().zip(dense.iter().flatten()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            }
        }
    }
}

#[test]
fn propagation_matches_dense_powers() {
    for seed in 0..10 {
        let g = random_graph(15, 0.2, 100 + seed);
        let h0 = FeatureMatrix::<f64>::random(15, 4, utmp::features::RandomKind::Gaussian, seed).unwrap();
        let h0_dense: Mat = (0..15).map(|i| h0.row(i).to_vec()).collect();
        for v in Variant::ALL {
            let op = Operator::build(&g, v, 0.0);
            for l in 0..=4 {
                let expected = matmul(&power(&dense_operator(&g, v), l), &h0_dense);
                let got = op.propagate(&h0, l).unwrap();
                for i in 0..15 {
                    for j in 0..4 {
                        assert_abs_diff_eq!(got.get(i, j), expected[i][j], epsilon = 1e-9);
                    }
                }
            }
        }
    }
}

#[test]
fn gin_epsilon_sets_diagonal() {
    let g = random_graph(8, 0.4, 3);
    let op = Operator::build(&g, Variant::Gin, 0.5);
    let mut expected = adjacency(&g, true);
    for (i, row) in expected.iter_mut().enumerate() {
        row[i] = 1.5;
    }
    assert_eq!(op.to_dense(), expected);
}

#[test]
fn one_hot_gram_is_s_power_outer_product() {
    for seed in 0..10 {
        let g = random_graph(12, 0.3, 200 + seed);
        let h0 = FeatureMatrix::<f64>::one_hot(12);
        let pairs: Vec<(usize, usize)> = (0..12).flat_map(|u| (0..12).map(move |v| (u, v))).collect();
        for v in Variant::ALL {
            let op = Operator::build(&g, v, 0.0);
            for l in 1..=3 {
                let sl = power(&dense_operator(&g, v), l);
                let gram = matmul(&sl, &transpose(&sl));
                let got = inner_product_scores(&op.propagate(&h0, l).unwrap(), &pairs).unwrap();
                for (&(a, b), x) in pairs.iter().zip(&got) {
                    assert_abs_diff_eq!(*x, gram[a][b], epsilon = 1e-10);
                }
            }
        }
    }
}

#[test]
fn spec_propagation_examples() {
    let h = FeatureMatrix::<f64>::one_hot(3);
    let gin = Operator::build(&k3(), Variant::Gin, 0.0).propagate(&h, 1).unwrap();
    assert!(gin.values().iter().all(|&x| x == 1.0));
    assert_eq!(inner_product_scores(&gin, &[(0, 1), (1, 2), (0, 2)]).unwrap(), vec![3.0; 3]);

    let h2 = FeatureMatrix::<f64>::one_hot(2);
    let sage = Operator::build(&p2(), Variant::Sage, 0.0).propagate(&h2, 1).unwrap();
    assert_eq!(sage.values(), &[0.5; 4]);
    let gcn = Operator::build(&p2(), Variant::Gcn, 0.0).propagate(&h2, 1).unwrap();
    assert_abs_diff_eq!(inner_product_scores(&gcn, &[(0, 1)]).unwrap()[0], 0.5, epsilon = 1e-15);

    let k3_sage = Operator::build(&k3(), Variant::Sage, 0.0);
    assert!(k3_sage.to_dense().iter().flatten().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    let p2_gcn = Operator::build(&p2(), Variant::Gcn, 0.0);
    assert!(p2_gcn.to_dense().iter().flatten().all(|&x| (x - 0.5).abs() < 1e-15));
}

#[test]
fn path_counts_match_augmented_powers() {
    for seed in 0..10 {
        let g = random_graph(9, 0.3, 300 + seed);
        let a_loop = adjacency(&g, true);
        let a = adjacency(&g, false);
        for l in 0..=4 {
            let (pl, ql) = (power(&a_loop, l), power(&a, l));
            for u in 0..9 {
                for v in 0..9 {
                    let with = count_paths(&g, u, v, l, true, DEFAULT_PATH_BUDGET).unwrap();
                    let without = count_paths(&g, u, v, l, false, DEFAULT_PATH_BUDGET).unwrap();
                    assert_eq!(with as f64, pl[u][v]);
                    assert_eq!(without as f64, ql[u][v]);
                }
            }
        }
    }
}

#[test]
fn enumerated_paths_are_valid_walks() {
    let g = random_graph(7, 0.4, 9);
    let ens = enumerate_paths(&g, 0, 3, 3, true, DEFAULT_PATH_BUDGET).unwrap();
    assert_eq!(ens.count() as f64, power(&adjacency(&g, true), 3)[0][3]);
    for p in &ens.paths {
        assert_eq!(p.len(), 4);
        assert_eq!((p[0], p[3]), (0, 3));
        assert!(p.windows(2).all(|w| w[0] == w[1] || g.has_edge(w[0], w[1])));
    }
}

#[test]
fn k3_gin_paths_of_length_two() {
    // u-u-v, u-v-v and u-w-v in Ã
    assert_eq!(count_paths(&k3(), 0, 1, 2, true, DEFAULT_PATH_BUDGET).unwrap(), 3);
}

#[test]
fn path_sum_oracle_matches_dense_gram() {
    for seed in 0..8 {
        let g = random_graph(10, 0.3, 400 + seed);
        for v in Variant::ALL {
            for l in 1..=2 {
                let sl = power(&dense_operator(&g, v), l);
                let gram = matmul(&sl, &transpose(&sl));
                for a in 0..10 {
                    for b in 0..10 {
                        let o = oracle_inner_product(&g, v, a, b, l, DEFAULT_PATH_BUDGET).unwrap();
                        assert_abs_diff_eq!(o, gram[a][b], epsilon = 1e-10);
                    }
                }
            }
        }
    }
}

#[test]
fn walk_probabilities_match_row_stochastic_powers() {
    let g = random_graph(10, 0.3, 5);
    let p = dense_operator(&g, Variant::Sage);
    for l in 0..=5 {
        let pl = power(&p, l);
        for u in 0..10 {
            for v in 0..10 {
                assert_abs_diff_eq!(walk_probability(&g, u, v, l).unwrap(), pl[u][v], epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn triadic_examples_and_correspondence() {
    // star with center 0: leaves 1 and 2 share the center
    let star = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap().0;
    let t = triadic_measures(&star, 1, 2).unwrap();
    assert_eq!(t.t, 1.0);
    assert_abs_diff_eq!(t.t_d, 1.0 / 4.0, epsilon = 1e-15);
    assert_abs_diff_eq!(t.t_n, 0.5 * 0.25, epsilon = 1e-15);

    for seed in 0..10 {
        let g = random_graph(14, 0.25, 500 + seed);
        let h = FeatureMatrix::<f64>::one_hot(14);
        let grams: Vec<Vec<f64>> = Variant::ALL
            .iter()
            .map(|&v| {
                let z = Operator::build(&g, v, 0.0).propagate(&h, 1).unwrap();
                let pairs: Vec<(usize, usize)> = (0..14).flat_map(|u| (0..14).map(move |w| (u, w))).collect();
                inner_product_scores(&z, &pairs).unwrap()
            })
            .collect();
        for u in 0..14 {
            for v in 0..14 {
                if u == v || g.has_edge(u, v) {
                    continue;
                }
                let t = triadic_measures(&g, u, v).unwrap();
                let idx = u * 14 + v;
                assert_abs_diff_eq!(grams[0][idx], t.t_n, epsilon = 1e-12);
                assert_abs_diff_eq!(grams[1][idx], t.t_d, epsilon = 1e-12);
                assert_abs_diff_eq!(grams[2][idx], t.t, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn adamic_adar_and_resource_allocation() {
    // 0 and 1 share neighbours 2 (degree 2) and 3 (degree 3)
    let g = Graph::from_edges(5, [(0, 2), (1, 2), (0, 3), (1, 3), (3, 4)]).unwrap().0;
    let aug = neighborhood_heuristics(&g, 0, 1, DegreeConvention::Augmented).unwrap();
    assert_abs_diff_eq!(aug.adamic_adar, 1.0 / 3f64.ln() + 1.0 / 4f64.ln(), epsilon = 1e-15);
    assert_abs_diff_eq!(aug.resource_allocation, 1.0 / 3.0 + 1.0 / 4.0, epsilon = 1e-15);
    let classic = neighborhood_heuristics(&g, 0, 1, DegreeConvention::Classical).unwrap();
    assert_abs_diff_eq!(classic.adamic_adar, 1.0 / 2f64.ln() + 1.0 / 3f64.ln(), epsilon = 1e-15);
    assert_abs_diff_eq!(classic.resource_allocation, 0.5 + 1.0 / 3.0, epsilon = 1e-15);
}

fn dense_series(g: &Graph, kind: SeriesKind, gamma: f64, len: usize) -> Mat {
    let n = g.node_count();
    let mut out = vec![vec![0.0; n]; n];
    match kind {
        SeriesKind::Katz => {
            let a = adjacency(g, false);
            for l in 1..=len {
                let al = power(&a, l);
                for i in 0..n {
                    for j in 0..n {
                        out[i][j] += gamma.powi(l as i32) * al[i][j];
                    }
                }
            }
        }
        SeriesKind::RootedPageRank => {
            let p = dense_operator(g, Variant::Sage);
            for l in 0..=len {
                let pl = power(&p, l);
                for i in 0..n {
                    for j in 0..n {
                        out[i][j] += (1.0 - gamma) * gamma.powi(l as i32) * 0.5 * (pl[i][j] + pl[j][i]);
                    }
                }
            }
        }
        SeriesKind::SimRank => {
            let p = dense_operator(g, Variant::Sage);
            for l in 1..=len {
                let pl = power(&p, l);
                let meet = matmul(&pl, &transpose(&pl));
                for i in 0..n {
                    for j in 0..n {
                        out[i][j] += gamma.powi(l as i32) * meet[i][j];
                    }
                }
            }
        }
    }
    out
}

#[test]
fn series_match_dense_powers() {
    for seed in 0..6 {
        let n = 4 + seed as usize;
        let g = random_graph(n, 0.35, 600 + seed);
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).collect();
        for kind in [SeriesKind::Katz, SeriesKind::RootedPageRank, SeriesKind::SimRank] {
            for (gamma, len) in [(0.5, 1), (0.3, 4), (0.85, 6)] {
                let params = SeriesParams::new(gamma, len).unwrap();
                let got = truncated_series(&g, kind, params, &pairs).unwrap();
                let expected = dense_series(&g, kind, gamma, len);
                for (&(u, v), x) in pairs.iter().zip(&got) {
                    assert_abs_diff_eq!(*x, expected[u][v], epsilon = 1e-9);
                }
            }
        }
    }
}

#[test]
fn katz_single_edge() {
    let got = truncated_series(&p2(), SeriesKind::Katz, SeriesParams::new(0.5, 6).unwrap(), &[(0, 1)]).unwrap();
    // odd powers of the single-edge adjacency are off-diagonal: .5 + .125 + .03125
    assert_eq!(got[0], 0.65625);
}

#[test]
fn meeting_probability_is_sage_gram() {
    let g = random_graph(9, 0.3, 77);
    let h = FeatureMatrix::<f64>::one_hot(9);
    let op = PropagationOperator::<f64>::build(&g, Variant::Sage, 0.0);
    for l in 1..=4 {
        let z = op.propagate(&h, l).unwrap();
        for u in 0..9 {
            for v in 0..9 {
                let ip = inner_product_scores(&z, &[(u, v)]).unwrap()[0];
                assert_abs_diff_eq!(meeting_probability(&g, u, v, l).unwrap(), ip, epsilon = 1e-12);
            }
        }
    }
}
