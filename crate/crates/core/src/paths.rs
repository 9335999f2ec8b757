//! Path and walk based node similarity.
//!
//! Two families live here: exhaustive path enumeration (the desk-scale oracle
//! for the inner-product identities of the propagation operators) and the
//! classical link heuristics (common neighbours and its normalized variants,
//! Adamic–Adar, resource allocation, truncated Katz / rooted PageRank /
//! SimRank series).

use std::collections::HashMap;
use std::collections::VecDeque;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::propagation::Variant;

pub const DEFAULT_PATH_BUDGET: u64 = 10_000_000;

/// All length-`len` walks from `u` to `v`, as vertex sequences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathEnsemble {
    pub u: usize,
    pub v: usize,
    pub len: usize,
    pub self_loops: bool,
    pub paths: Vec<Vec<usize>>,
}

impl PathEnsemble {
    pub fn count(&self) -> usize {
        self.paths.len()
    }
}

fn step_candidates(g: &Graph, x: usize, self_loops: bool) -> impl Iterator<Item = usize> + '_ {
    let own = if self_loops { Some(x) } else { None };
    own.into_iter().chain(g.neighbors(x).iter().copied())
}

fn bfs_distances(g: &Graph, source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.node_count()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(x) = queue.pop_front() {
        for &y in g.neighbors(x) {
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    dist
}

/// Depth-first enumeration of every length-`len` walk from `start`.
/// `target` restricts output to walks ending there and prunes branches that
/// cannot reach it in the remaining steps.
struct Walker<'a, F> {
    g: &'a Graph,
    len: usize,
    self_loops: bool,
    target_dist: Option<(usize, Vec<usize>)>,
    budget: u64,
    found: u64,
    stack: Vec<usize>,
    visit: F,
}

impl<F: FnMut(&[usize])> Walker<'_, F> {
    fn run(&mut self, start: usize) -> Result<u64> {
        self.stack.clear();
        self.stack.push(start);
        self.descend()?;
        Ok(self.found)
    }

    fn descend(&mut self) -> Result<()> {
        let depth = self.stack.len() - 1;
        let x = *self.stack.last().unwrap();
        if depth == self.len {
            if let Some((t, _)) = &self.target_dist {
                if x != *t {
                    return Ok(());
                }
            }
            self.found += 1;
            if self.found > self.budget {
                return Err(Error::OracleOverflow(self.budget));
            }
            (self.visit)(&self.stack);
            return Ok(());
        }
        let remaining = self.len - depth - 1;
        let g = self.g;
        for y in step_candidates(g, x, self.self_loops) {
            if let Some((_, dist)) = &self.target_dist {
                if dist[y] > remaining {
                    continue;
                }
            }
            self.stack.push(y);
            let r = self.descend();
            self.stack.pop();
            r?;
        }
        Ok(())
    }
}

fn walk_pair<F: FnMut(&[usize])>(
    g: &Graph,
    u: usize,
    v: usize,
    len: usize,
    self_loops: bool,
    budget: u64,
    visit: F,
) -> Result<u64> {
    g.check_node(u)?;
    g.check_node(v)?;
    Walker {
        g,
        len,
        self_loops,
        target_dist: Some((v, bfs_distances(g, v))),
        budget,
        found: 0,
        stack: Vec::with_capacity(len + 1),
        visit,
    }
    .run(u)
}

pub fn enumerate_paths(
    g: &Graph,
    u: usize,
    v: usize,
    len: usize,
    self_loops: bool,
    budget: u64,
) -> Result<PathEnsemble> {
    let mut paths = Vec::new();
    walk_pair(g, u, v, len, self_loops, budget, |p| paths.push(p.to_vec()))?;
    Ok(PathEnsemble {
        u,
        v,
        len,
        self_loops,
        paths,
    })
}

/// Number of length-`len` walks from `u` to `v`, by explicit enumeration.
/// With `self_loops` this equals `(Ã^len)_{uv}`, otherwise `(A^len)_{uv}`.
pub fn count_paths(g: &Graph, u: usize, v: usize, len: usize, self_loops: bool, budget: u64) -> Result<u64> {
    walk_pair(g, u, v, len, self_loops, budget, |_| {})
}

fn path_weight(g: &Graph, variant: Variant, path: &[usize]) -> f64 {
    let inv = |x: usize| 1.0 / g.aug_degree(x) as f64;
    let last = path.len() - 1;
    match variant {
        Variant::Gin => 1.0,
        Variant::Gcn => {
            let ends = ((g.aug_degree(path[0]) * g.aug_degree(path[last])) as f64).sqrt();
            path[1..last].iter().map(|&x| inv(x)).product::<f64>() / ends
        }
        Variant::Sage => {
            let mid = last / 2;
            path.iter()
                .enumerate()
                .filter(|&(i, _)| i != mid)
                .map(|(_, &x)| inv(x))
                .product()
        }
    }
}

/// Path-sum form of `⟨h_u^(l), h_v^(l)⟩` for one-hot features, enumerating
/// every self-loop walk of length `2l` between `u` and `v`:
///
/// * GCN: `1/sqrt(d̃_u d̃_v) · Σ_p Π_{interior i} 1/d̃_i`
/// * SAGE: `Σ_p Π_{i ≠ midpoint} 1/d̃_i`
/// * GIN: `|P^{2l}_{uv}|`
pub fn oracle_inner_product(g: &Graph, variant: Variant, u: usize, v: usize, layers: usize, budget: u64) -> Result<f64> {
    let mut total = 0.0;
    walk_pair(g, u, v, 2 * layers, true, budget, |p| total += path_weight(g, variant, p))?;
    Ok(total)
}

/// [`oracle_inner_product`] for `u` against every node, from a single
/// enumeration of the walks leaving `u`.
pub fn oracle_inner_products_from(g: &Graph, variant: Variant, u: usize, layers: usize, budget: u64) -> Result<Vec<f64>> {
    g.check_node(u)?;
    let mut totals = vec![0.0; g.node_count()];
    let len = 2 * layers;
    Walker {
        g,
        len,
        self_loops: true,
        target_dist: None,
        budget,
        found: 0,
        stack: Vec::with_capacity(len + 1),
        visit: |p: &[usize]| totals[p[len]] += path_weight(g, variant, p),
    }
    .run(u)?;
    Ok(totals)
}

/// One step of the self-loop random walk: `p ← p · D̃^-1 Ã`.
fn walk_step(g: &Graph, p: &[f64]) -> Vec<f64> {
    let mut next = vec![0.0; p.len()];
    for (i, &mass) in p.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let share = mass / g.aug_degree(i) as f64;
        next[i] += share;
        for &j in g.neighbors(i) {
            next[j] += share;
        }
    }
    next
}

/// Distribution of the self-loop random walk from `u` after `len` steps,
/// i.e. row `u` of `(D̃^-1 Ã)^len`.
pub fn walk_distribution(g: &Graph, u: usize, len: usize) -> Result<Vec<f64>> {
    g.check_node(u)?;
    let mut p = vec![0.0; g.node_count()];
    p[u] = 1.0;
    for _ in 0..len {
        p = walk_step(g, &p);
    }
    Ok(p)
}

/// `P(u → v, len) = ((D̃^-1 Ã)^len)_{uv}`.
pub fn walk_probability(g: &Graph, u: usize, v: usize, len: usize) -> Result<f64> {
    g.check_node(v)?;
    Ok(walk_distribution(g, u, len)?[v])
}

/// Sorted-list intersection of the (loop-free) neighbourhoods of `u` and `v`.
pub fn common_neighbors(g: &Graph, u: usize, v: usize) -> Vec<usize> {
    let (a, b) = (g.neighbors(u), g.neighbors(v));
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn check_pair(g: &Graph, u: usize, v: usize) -> Result<()> {
    g.check_node(u)?;
    g.check_node(v)?;
    if u == v {
        return Err(Error::InvalidParameter(format!("pair ({u}, {v}) must join distinct nodes")));
    }
    Ok(())
}

/// Triadic-closure scores: the common-neighbour count and its two
/// degree-normalized forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triadic {
    /// `|N(u) ∩ N(v)|`
    pub t: f64,
    /// `T / (d̃_u d̃_v)`
    pub t_d: f64,
    /// `1/sqrt(d̃_u d̃_v) · Σ_{i ∈ N(u) ∩ N(v)} 1/d̃_i`
    pub t_n: f64,
}

pub fn triadic_measures(g: &Graph, u: usize, v: usize) -> Result<Triadic> {
    check_pair(g, u, v)?;
    let common = common_neighbors(g, u, v);
    let du = g.aug_degree(u) as f64;
    let dv = g.aug_degree(v) as f64;
    let t = common.len() as f64;
    let weighted: f64 = common.iter().map(|&i| 1.0 / g.aug_degree(i) as f64).sum();
    Ok(Triadic {
        t,
        t_d: t / (du * dv),
        t_n: weighted / (du * dv).sqrt(),
    })
}

/// Which degree the Adamic–Adar and resource-allocation weights use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DegreeConvention {
    /// `d̃ = d + 1`
    #[default]
    Augmented,
    /// `d`
    Classical,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborhoodScores {
    pub adamic_adar: f64,
    pub resource_allocation: f64,
}

pub fn neighborhood_heuristics(g: &Graph, u: usize, v: usize, degrees: DegreeConvention) -> Result<NeighborhoodScores> {
    check_pair(g, u, v)?;
    let mut aa = 0.0;
    let mut ra = 0.0;
    for i in common_neighbors(g, u, v) {
        // a common neighbour of two distinct nodes has d >= 2, so ln d > 0
        let d = match degrees {
            DegreeConvention::Augmented => g.aug_degree(i),
            DegreeConvention::Classical => g.degree(i),
        } as f64;
        aa += 1.0 / d.ln();
        ra += 1.0 / d;
    }
    Ok(NeighborhoodScores {
        adamic_adar: aa,
        resource_allocation: ra,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Katz,
    RootedPageRank,
    SimRank,
}

impl FromStr for SeriesKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "katz" => Ok(SeriesKind::Katz),
            "rpr" | "rooted_pagerank" | "pagerank" => Ok(SeriesKind::RootedPageRank),
            "simrank" => Ok(SeriesKind::SimRank),
            _ => Err(Error::InvalidParameter(format!("unknown series '{s}'"))),
        }
    }
}

/// Damping `gamma ∈ (0, 1)` and truncation length `max_len >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct SeriesParams {
    gamma: f64,
    max_len: usize,
}

impl SeriesParams {
    pub fn new(gamma: f64, max_len: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if max_len == 0 {
            return Err(Error::InvalidParameter("series length must be >= 1".into()));
        }
        Ok(SeriesParams { gamma, max_len })
    }

    /// γ = 0.85 for rooted PageRank, 0.5 otherwise; L = 10.
    pub fn default_for(kind: SeriesKind) -> Self {
        let gamma = match kind {
            SeriesKind::RootedPageRank => 0.85,
            SeriesKind::Katz | SeriesKind::SimRank => 0.5,
        };
        SeriesParams { gamma, max_len: 10 }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }
}

/// Katz walk counts use the loop-free adjacency: `x ← A x`.
fn adjacency_step(g: &Graph, x: &[f64]) -> Vec<f64> {
    (0..g.node_count())
        .map(|i| g.neighbors(i).iter().map(|&j| x[j]).sum())
        .collect()
}

/// Truncated power-series similarities:
///
/// * Katz: `Σ_{l=1..L} γ^l (A^l)_{uv}`
/// * rooted PageRank: `(1-γ) Σ_{l=0..L} γ^l (P(u→v,l) + P(v→u,l)) / 2`
/// * SimRank: `Σ_{l=1..L} γ^l Σ_i P(u→i,l) P(v→i,l)`
pub fn truncated_series(g: &Graph, kind: SeriesKind, params: SeriesParams, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    let (gamma, len) = (params.gamma, params.max_len);
    for &(u, v) in pairs {
        g.check_node(u)?;
        g.check_node(v)?;
    }
    match kind {
        SeriesKind::Katz => {
            let mut rows: HashMap<usize, Vec<f64>> = HashMap::new();
            pairs
                .iter()
                .map(|&(u, v)| {
                    let row = rows.entry(u).or_insert_with(|| {
                        let mut x = vec![0.0; g.node_count()];
                        x[u] = 1.0;
                        let mut acc = vec![0.0; g.node_count()];
                        let mut weight = 1.0;
                        for _ in 0..len {
                            x = adjacency_step(g, &x);
                            weight *= gamma;
                            for (a, xi) in acc.iter_mut().zip(&x) {
                                *a += weight * xi;
                            }
                        }
                        acc
                    });
                    Ok(row[v])
                })
                .collect()
        }
        SeriesKind::RootedPageRank | SeriesKind::SimRank => {
            let mut walks: HashMap<usize, Vec<Vec<f64>>> = HashMap::new();
            for &x in pairs.iter().flat_map(|(u, v)| [u, v]) {
                walks.entry(x).or_insert_with(|| {
                    let mut p = vec![0.0; g.node_count()];
                    p[x] = 1.0;
                    let mut out = vec![p.clone()];
                    for _ in 0..len {
                        p = walk_step(g, &p);
                        out.push(p.clone());
                    }
                    out
                });
            }
            pairs
                .iter()
                .map(|&(u, v)| {
                    let (hu, hv) = (&walks[&u], &walks[&v]);
                    let mut total = 0.0;
                    let mut weight = 1.0;
                    for l in 0..=len {
                        if kind == SeriesKind::RootedPageRank {
                            total += weight * 0.5 * (hu[l][v] + hv[l][u]);
                        } else if l > 0 {
                            let meet: f64 = hu[l].iter().zip(&hv[l]).map(|(a, b)| a * b).sum();
                            total += weight * meet;
                        }
                        weight *= gamma;
                    }
                    Ok(if kind == SeriesKind::RootedPageRank {
                        (1.0 - gamma) * total
                    } else {
                        total
                    })
                })
                .collect()
        }
    }
}

/// Probability that simultaneous self-loop walks from `u` and `v` occupy the
/// same node after `len` steps.
pub fn meeting_probability(g: &Graph, u: usize, v: usize, len: usize) -> Result<f64> {
    let pu = walk_distribution(g, u, len)?;
    let pv = walk_distribution(g, v, len)?;
    Ok(pu.iter().zip(&pv).map(|(a, b)| a * b).sum())
}
