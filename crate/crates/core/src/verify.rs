//! Randomized check of the propagation identities against independent
//! oracles on seeded Erdős–Rényi graphs.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::Graph;
use crate::paths::{oracle_inner_products_from, triadic_measures, walk_distribution, DEFAULT_PATH_BUDGET};
use crate::propagation::{PropagationOperator, Variant};
use crate::seed::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub graphs: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub edge_prob: f64,
    pub layers: Vec<usize>,
    pub seed: u64,
    pub tolerance: f64,
    pub triadic_tolerance: f64,
    pub associativity_tolerance: f64,
    /// Scale one stored operator weight per graph so that checks must fail.
    pub perturb: bool,
    pub path_budget: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            graphs: 100,
            min_n: 5,
            max_n: 30,
            edge_prob: 0.2,
            layers: vec![1, 2, 3],
            seed: 0,
            tolerance: 1e-9,
            triadic_tolerance: 1e-12,
            associativity_tolerance: 1e-10,
            perturb: false,
            path_budget: DEFAULT_PATH_BUDGET,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// UTGIN Gram entries equal `(Ã^{2l})_{uv}` as integers.
    GinPathCount,
    /// UTSAGE Gram entries equal the `l`-step meeting probability.
    SageMeeting,
    /// UTGCN Gram entries equal `sqrt(P(u→v,2l) P(v→u,2l))`.
    GcnGeometricMean,
    /// Gram entries equal the weighted path-sum oracle.
    PathOracle(Variant),
    /// At one layer, non-adjacent Gram entries equal T, T_d or T_n.
    Triadic(Variant),
    Symmetry(Variant),
    RowStochastic,
    Associativity(Variant),
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Check::GinPathCount => write!(f, "utgin_path_count"),
            Check::SageMeeting => write!(f, "utsage_meeting"),
            Check::GcnGeometricMean => write!(f, "utgcn_geometric_mean"),
            Check::PathOracle(v) => write!(f, "{v}_path_oracle"),
            Check::Triadic(v) => write!(f, "{v}_triadic"),
            Check::Symmetry(v) => write!(f, "{v}_symmetry"),
            Check::RowStochastic => write!(f, "utsage_row_stochastic"),
            Check::Associativity(v) => write!(f, "{v}_associativity"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub check: Check,
    pub graph: usize,
    pub graph_seed: u64,
    pub n: usize,
    pub layers: usize,
    pub u: usize,
    pub v: usize,
    pub expected: f64,
    pub actual: f64,
    pub breach: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CheckTally {
    pub check: String,
    pub compared: u64,
    pub failed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub graphs: usize,
    pub tallies: Vec<CheckTally>,
    pub failures: Vec<Failure>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn compared(&self) -> u64 {
        self.tallies.iter().map(|t| t.compared).sum()
    }

    pub fn write_summary_csv<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "check,compared,failed")?;
        for t in &self.tallies {
            writeln!(w, "{},{},{}", t.check, t.compared, t.failed)?;
        }
        Ok(())
    }

    pub fn write_failures_csv<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "check,graph,graph_seed,n,layers,u,v,expected,actual,breach,tolerance")?;
        for f in &self.failures {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                f.check, f.graph, f.graph_seed, f.n, f.layers, f.u, f.v, f.expected, f.actual, f.breach, f.tolerance
            )?;
        }
        Ok(())
    }
}

/// The graph checked at position `index` of a suite with master seed
/// `seed`, with the seed it was drawn from.
pub fn suite_graph(cfg: &VerifyConfig, index: usize) -> (Graph, u64) {
    let graph_seed = derive_seed(cfg.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(graph_seed);
    let n = rng.random_range(cfg.min_n..=cfg.max_n);
    (Graph::erdos_renyi(n, cfg.edge_prob, &mut rng), graph_seed)
}

/// Runs the full suite in parallel over graphs.
pub fn run_suite(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.min_n == 0 || cfg.min_n > cfg.max_n {
        return Err(Error::InvalidParameter(format!(
            "node range [{}, {}] is empty",
            cfg.min_n, cfg.max_n
        )));
    }
    if !(0.0..=1.0).contains(&cfg.edge_prob) {
        return Err(Error::InvalidParameter("edge probability must lie in [0, 1]".into()));
    }
    let per_graph = (0..cfg.graphs)
        .into_par_iter()
        .map(|i| {
            let (g, seed) = suite_graph(cfg, i);
            check_graph(cfg, &g, i, seed)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut tallies: Vec<CheckTally> = Vec::new();
    let mut failures = Vec::new();
    for (counts, fails) in per_graph {
        for (check, compared) in counts {
            let name = check.to_string();
            let failed = fails.iter().filter(|f: &&Failure| f.check == check).count() as u64;
            match tallies.iter_mut().find(|t| t.check == name) {
                Some(t) => {
                    t.compared += compared;
                    t.failed += failed;
                }
                None => tallies.push(CheckTally {
                    check: name,
                    compared,
                    failed,
                }),
            }
        }
        failures.extend(fails);
    }
    Ok(VerifyReport {
        graphs: cfg.graphs,
        tallies,
        failures,
    })
}

struct Ctx {
    graph: usize,
    seed: u64,
    n: usize,
    counts: Vec<(Check, u64)>,
    failures: Vec<Failure>,
}

impl Ctx {
    #[allow(clippy::too_many_arguments)]
    fn compare(&mut self, check: Check, layers: usize, u: usize, v: usize, expected: f64, actual: f64, tol: f64) {
        match self.counts.iter_mut().find(|(c, _)| *c == check) {
            Some((_, k)) => *k += 1,
            None => self.counts.push((check, 1)),
        }
        let breach = (expected - actual).abs();
        // NaN compares false, so it is caught here as well
        if !(breach <= tol) {
            self.failures.push(Failure {
                check,
                graph: self.graph,
                graph_seed: self.seed,
                n: self.n,
                layers,
                u,
                v,
                expected,
                actual,
                breach,
                tolerance: tol,
            });
        }
    }
}

/// Dense integer power of `Ã`.
fn augmented_power(g: &Graph, power: usize) -> Vec<Vec<u128>> {
    let n = g.node_count();
    let mut a = vec![vec![0u128; n]; n];
    for (u, row) in a.iter_mut().enumerate() {
        row[u] = 1;
        for &v in g.neighbors(u) {
            row[v] = 1;
        }
    }
    let mut acc: Vec<Vec<u128>> = (0..n).map(|i| (0..n).map(|j| u128::from(i == j)).collect()).collect();
    for _ in 0..power {
        acc = (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| acc[i][k] * a[k][j]).sum()).collect())
            .collect();
    }
    acc
}

fn gram(h: &FeatureMatrix<f64>) -> Vec<Vec<f64>> {
    let n = h.rows();
    (0..n)
        .map(|u| (0..n).map(|v| crate::scalar::dot(h.row(u), h.row(v))).collect())
        .collect()
}

fn build_operator(g: &Graph, variant: Variant, cfg: &VerifyConfig, seed: u64) -> PropagationOperator<f64> {
    let mut op = PropagationOperator::build(g, variant, 0.0);
    if cfg.perturb {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1000 + variant as u64));
        let index = rng.random_range(0..op.nnz());
        op.perturb_entry(index, 1.5);
    }
    op
}

type GraphOutcome = (Vec<(Check, u64)>, Vec<Failure>);

fn check_graph(cfg: &VerifyConfig, g: &Graph, graph: usize, seed: u64) -> Result<GraphOutcome> {
    let n = g.node_count();
    let mut ctx = Ctx {
        graph,
        seed,
        n,
        counts: Vec::new(),
        failures: Vec::new(),
    };
    let h0 = FeatureMatrix::<f64>::one_hot(n);
    let max_l = cfg.layers.iter().copied().max().unwrap_or(0);
    // walk distributions up to 2·max_l steps, from every node
    let walks: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|u| (0..=2 * max_l).map(|len| walk_distribution(g, u, len)).collect::<Result<_>>())
        .collect::<Result<_>>()?;

    for variant in Variant::ALL {
        let op = build_operator(g, variant, cfg, seed);
        match variant {
            Variant::Sage => {
                for (u, s) in op.row_sums().into_iter().enumerate() {
                    ctx.compare(Check::RowStochastic, 0, u, u, 1.0, s, 1e-12);
                }
            }
            Variant::Gcn | Variant::Gin => {
                let dense = op.to_dense();
                for u in 0..n {
                    for v in (u + 1)..n {
                        ctx.compare(Check::Symmetry(variant), 0, u, v, dense[u][v], dense[v][u], 0.0);
                    }
                }
            }
        }

        for &l in &cfg.layers {
            let h = op.propagate(&h0, l)?;
            let gm = gram(&h);

            if l >= 1 {
                let stepped = op.propagate(&op.propagate(&h0, 1)?, l - 1)?;
                for u in 0..n {
                    for j in 0..n {
                        ctx.compare(
                            Check::Associativity(variant),
                            l,
                            u,
                            j,
                            h.get(u, j),
                            stepped.get(u, j),
                            cfg.associativity_tolerance,
                        );
                    }
                }
            }

            match variant {
                Variant::Gin => {
                    let power = augmented_power(g, 2 * l);
                    for u in 0..n {
                        for v in u..n {
                            // exact: the expected count converts to f64 without rounding at this scale
                            ctx.compare(Check::GinPathCount, l, u, v, power[u][v] as f64, gm[u][v], 0.0);
                        }
                    }
                }
                Variant::Sage => {
                    for u in 0..n {
                        for v in u..n {
                            let meet: f64 = walks[u][l].iter().zip(&walks[v][l]).map(|(a, b)| a * b).sum();
                            ctx.compare(Check::SageMeeting, l, u, v, meet, gm[u][v], cfg.tolerance);
                        }
                    }
                }
                Variant::Gcn => {
                    for u in 0..n {
                        for v in u..n {
                            let expected = (walks[u][2 * l][v] * walks[v][2 * l][u]).sqrt();
                            ctx.compare(Check::GcnGeometricMean, l, u, v, expected, gm[u][v], cfg.tolerance);
                        }
                    }
                }
            }

            for u in 0..n {
                let oracle = oracle_inner_products_from(g, variant, u, l, cfg.path_budget)?;
                for v in u..n {
                    ctx.compare(Check::PathOracle(variant), l, u, v, oracle[v], gm[u][v], cfg.tolerance);
                }
            }

            if l == 1 {
                for u in 0..n {
                    for v in (u + 1)..n {
                        if g.has_edge(u, v) {
                            continue;
                        }
                        let t = triadic_measures(g, u, v)?;
                        let expected = match variant {
                            Variant::Gin => t.t,
                            Variant::Sage => t.t_d,
                            Variant::Gcn => t.t_n,
                        };
                        ctx.compare(Check::Triadic(variant), 1, u, v, expected, gm[u][v], cfg.triadic_tolerance);
                    }
                }
            }
        }
    }
    Ok((ctx.counts, ctx.failures))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyConfig {
        VerifyConfig {
            graphs: 8,
            max_n: 14,
            ..Default::default()
        }
    }

    #[test]
    fn clean_suite_passes() {
        let report = run_suite(&small()).unwrap();
        assert!(report.passed(), "{:?}", report.failures.first());
        assert!(report.compared() > 0);
        assert!(report.tallies.iter().any(|t| t.check == "utgin_path_count"));
    }

    #[test]
    fn perturbed_suite_fails() {
        let cfg = VerifyConfig {
            perturb: true,
            ..small()
        };
        let report = run_suite(&cfg).unwrap();
        assert!(!report.passed());
        assert!(report.failures.iter().all(|f| f.breach > f.tolerance));
        let seeds: Vec<u64> = (0..cfg.graphs).map(|i| suite_graph(&cfg, i).1).collect();
        assert!(report.failures.iter().all(|f| seeds[f.graph] == f.graph_seed));
    }

    #[test]
    fn suite_is_deterministic() {
        let cfg = VerifyConfig {
            perturb: true,
            graphs: 4,
            max_n: 10,
            ..Default::default()
        };
        assert_eq!(run_suite(&cfg).unwrap(), run_suite(&cfg).unwrap());
    }

    #[test]
    fn augmented_power_of_triangle() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap().0;
        // Ã = J, J² = 3J
        assert!(augmented_power(&g, 2).iter().flatten().all(|&x| x == 3));
    }
}
