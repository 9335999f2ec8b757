//! Undirected simple graphs stored as a symmetric CSR adjacency.
//!
//! Self-loops are never stored. The self-loop-augmented quantities used by the
//! propagation operators (`Ã = A + I`, `d̃ = d + 1`) are exposed as derived
//! accessors and materialized only inside [`crate::propagation`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Unordered node pair, normalized so that `u <= v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
}

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        if a <= b {
            Edge { u: a, v: b }
        } else {
            Edge { u: b, v: a }
        }
    }

    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }
}

impl From<(usize, usize)> for Edge {
    fn from((a, b): (usize, usize)) -> Self {
        Edge::new(a, b)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.u, self.v)
    }
}

/// Original node tokens and their dense ids.
#[derive(Debug, PartialEq, Eq)]
pub struct NodeLabels {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeLabels {
    fn push(&mut self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.names.len();
        self.names.push(token.to_owned());
        self.index.insert(token.to_owned(), id);
        id
    }
}

/// Counts of input lines that were dropped while building a graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub duplicate_edges: usize,
    pub self_loops: usize,
}

#[derive(Clone, Debug)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    labels: Option<Arc<NodeLabels>>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.offsets == other.offsets && self.targets == other.targets
    }
}

impl Graph {
    /// Builds a graph on `n` nodes from arbitrary pairs, dropping self-loops
    /// and duplicates.
    pub fn from_edges<I>(n: usize, pairs: I) -> Result<(Graph, ParseReport)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut report = ParseReport::default();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut seen = HashSet::new();
        for (a, b) in pairs {
            for x in [a, b] {
                if x >= n {
                    return Err(Error::IndexOutOfRange { index: x, n });
                }
            }
            if a == b {
                report.self_loops += 1;
                continue;
            }
            if !seen.insert(Edge::new(a, b)) {
                report.duplicate_edges += 1;
                continue;
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        Ok((Self::from_adjacency(adj, None), report))
    }

    fn from_adjacency(mut adj: Vec<Vec<usize>>, labels: Option<Arc<NodeLabels>>) -> Graph {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        let mut targets = Vec::with_capacity(adj.iter().map(Vec::len).sum());
        offsets.push(0);
        for row in adj.iter_mut() {
            row.sort_unstable();
            targets.extend_from_slice(row);
            offsets.push(targets.len());
        }
        Graph {
            offsets,
            targets,
            labels,
        }
    }

    /// Wraps raw CSR arrays without any checking. Intended for diagnostics
    /// and tests; run [`Graph::validate`] before trusting the result.
    pub fn from_csr_unchecked(offsets: Vec<usize>, targets: Vec<usize>) -> Graph {
        Graph {
            offsets,
            targets,
            labels: None,
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Degree in the graph with a self-loop on every node, `d̃(v) = d(v) + 1`.
    pub fn aug_degree(&self, v: usize) -> usize {
        self.degree(v) + 1
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u != v && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Edges with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| v > u)
                .map(move |&v| Edge { u, v })
        })
    }

    pub fn check_node(&self, v: usize) -> Result<()> {
        let n = self.node_count();
        if v < n {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: v, n })
        }
    }

    pub fn labels(&self) -> Option<&NodeLabels> {
        self.labels.as_deref()
    }

    /// Original token of node `v`, or its dense id when the graph was not parsed.
    pub fn label(&self, v: usize) -> String {
        match &self.labels {
            Some(l) => l.names[v].clone(),
            None => v.to_string(),
        }
    }

    /// Dense id of an original token. Without labels, tokens are read as ids.
    pub fn node_id(&self, token: &str) -> Option<usize> {
        match &self.labels {
            Some(l) => l.index.get(token).copied(),
            None => token.parse().ok().filter(|&v| v < self.node_count()),
        }
    }

    /// Returns a copy with `removed` deleted. Node count is unchanged.
    pub fn remove_edges(&self, removed: &[Edge]) -> Result<Graph> {
        let mut drop: Vec<HashSet<usize>> = vec![HashSet::new(); self.node_count()];
        for e in removed {
            if e.u >= self.node_count() || e.v >= self.node_count() || !self.has_edge(e.u, e.v) {
                return Err(Error::MissingEdge(e.u, e.v));
            }
            drop[e.u].insert(e.v);
            drop[e.v].insert(e.u);
        }
        let adj = (0..self.node_count())
            .map(|u| {
                self.neighbors(u)
                    .iter()
                    .copied()
                    .filter(|v| !drop[u].contains(v))
                    .collect()
            })
            .collect();
        Ok(Self::from_adjacency(adj, self.labels.clone()))
    }

    pub fn validate(&self) -> Diagnostics {
        let mut d = Diagnostics::default();
        let n = self.node_count();
        let offsets_ok = !self.offsets.is_empty()
            && self.offsets[0] == 0
            && self.offsets.windows(2).all(|w| w[0] <= w[1])
            && *self.offsets.last().unwrap() == self.targets.len();
        if !offsets_ok {
            d.malformed_offsets = true;
            return d;
        }
        for u in 0..n {
            let row = self.neighbors(u);
            for (i, &v) in row.iter().enumerate() {
                if v >= n {
                    d.out_of_range.push((u, v));
                    continue;
                }
                if v == u {
                    d.self_loops.push(u);
                }
                if i > 0 {
                    if row[i - 1] > v {
                        d.unsorted_rows.push(u);
                    } else if row[i - 1] == v {
                        d.duplicate_entries.push((u, v));
                    }
                }
                if v != u && !self.neighbors(v).contains(&u) {
                    d.asymmetric.push((u, v));
                }
            }
        }
        d.unsorted_rows.dedup();
        d.self_loops.dedup();
        d
    }

    /// Writes the graph in edge-list format with dense ids.
    ///
    /// Every node is first declared by a `v v` line so that re-parsing
    /// reproduces the same id assignment and keeps isolated nodes; the parser
    /// drops those lines as self-loops. Edges follow as sorted `u v` lines.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# nodes={} edges={}", self.node_count(), self.edge_count())?;
        for v in 0..self.node_count() {
            writeln!(w, "{v} {v}")?;
        }
        for e in self.edges() {
            writeln!(w, "{} {}", e.u, e.v)?;
        }
        Ok(())
    }

    /// Undirected G(n, p) graph.
    pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Graph {
        let mut pairs = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < p {
                    pairs.push((u, v));
                }
            }
        }
        Graph::from_edges(n, pairs).expect("pairs are in range").0
    }
}

/// Parses a whitespace-separated edge list. Lines starting with `#` and blank
/// lines are skipped; tokens receive dense ids in order of first appearance.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<(Graph, ParseReport)> {
    let mut labels = NodeLabels {
        names: Vec::new(),
        index: HashMap::new(),
    };
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 2 tokens, found {}", tokens.len()),
            });
        }
        let a = labels.push(tokens[0]);
        let b = labels.push(tokens[1]);
        pairs.push((a, b));
    }
    if labels.names.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = labels.names.len();
    let (mut g, report) = Graph::from_edges(n, pairs)?;
    g.labels = Some(Arc::new(labels));
    Ok((g, report))
}

pub fn parse_edge_str(text: &str) -> Result<(Graph, ParseReport)> {
    parse_edge_list(text.as_bytes())
}

/// Structural check results. Graphs built through this module always pass.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub malformed_offsets: bool,
    pub self_loops: Vec<usize>,
    pub unsorted_rows: Vec<usize>,
    pub duplicate_entries: Vec<(usize, usize)>,
    pub asymmetric: Vec<(usize, usize)>,
    pub out_of_range: Vec<(usize, usize)>,
}

impl Diagnostics {
    pub fn is_ok(&self) -> bool {
        !self.malformed_offsets
            && self.self_loops.is_empty()
            && self.unsorted_rows.is_empty()
            && self.duplicate_entries.is_empty()
            && self.asymmetric.is_empty()
            && self.out_of_range.is_empty()
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = |ok: bool| if ok { "ok" } else { "FAIL" };
        writeln!(f, "offsets: {}", status(!self.malformed_offsets))?;
        writeln!(f, "self-loops: {} ({})", status(self.self_loops.is_empty()), self.self_loops.len())?;
        writeln!(f, "sorted rows: {} ({})", status(self.unsorted_rows.is_empty()), self.unsorted_rows.len())?;
        writeln!(
            f,
            "duplicates: {} ({})",
            status(self.duplicate_entries.is_empty()),
            self.duplicate_entries.len()
        )?;
        writeln!(f, "symmetry: {} ({})", status(self.asymmetric.is_empty()), self.asymmetric.len())?;
        write!(f, "range: {} ({})", status(self.out_of_range.is_empty()), self.out_of_range.len())
    }
}
