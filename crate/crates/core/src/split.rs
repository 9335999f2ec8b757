//! Transductive edge splits and negative sampling.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::seed::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitWarning {
    EmptyValidation,
    EmptyTest,
}

/// Disjoint train/validation/test positives partitioning the edges of a
/// graph, with frozen validation and test negatives of matching sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSplit {
    pub train_pos: Vec<Edge>,
    pub val_pos: Vec<Edge>,
    pub test_pos: Vec<Edge>,
    pub val_neg: Vec<Edge>,
    pub test_neg: Vec<Edge>,
    pub seed: u64,
    pub warnings: Vec<SplitWarning>,
}

impl EdgeSplit {
    pub fn all_positives(&self) -> impl Iterator<Item = Edge> + '_ {
        self.train_pos
            .iter()
            .chain(&self.val_pos)
            .chain(&self.test_pos)
            .copied()
    }

    /// Validation and test positives, i.e. the edges hidden from message passing.
    pub fn held_out(&self) -> Vec<Edge> {
        self.val_pos.iter().chain(&self.test_pos).copied().collect()
    }
}

fn check_fraction(name: &str, x: f64) -> Result<()> {
    if (0.0..1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in [0, 1), got {x}")))
    }
}

/// Uniformly partitions the edges of `g` and samples frozen negatives.
/// Returns the split and the training graph `g` minus validation and test
/// positives.
pub fn split_edges(g: &Graph, test_frac: f64, val_frac: f64, seed: u64) -> Result<(EdgeSplit, Graph)> {
    check_fraction("test fraction", test_frac)?;
    check_fraction("validation fraction", val_frac)?;
    let m = g.edge_count();
    let n_test = (test_frac * m as f64).round() as usize;
    let n_val = (val_frac * m as f64).round() as usize;
    if n_test + n_val >= m {
        return Err(Error::InvalidParameter(format!(
            "fractions {test_frac}/{val_frac} leave no training edges out of {m}"
        )));
    }
    let mut edges: Vec<Edge> = g.edges().collect();
    edges.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 0)));
    let test_pos = edges[..n_test].to_vec();
    let val_pos = edges[n_test..n_test + n_val].to_vec();
    let train_pos = edges[n_test + n_val..].to_vec();

    let mut exclude = HashSet::new();
    let val_neg = sample_negatives(g, n_val, &exclude, derive_seed(seed, 1))?;
    exclude.extend(val_neg.iter().copied());
    let test_neg = sample_negatives(g, n_test, &exclude, derive_seed(seed, 2))?;

    let mut warnings = Vec::new();
    if val_pos.is_empty() {
        warnings.push(SplitWarning::EmptyValidation);
    }
    if test_pos.is_empty() {
        warnings.push(SplitWarning::EmptyTest);
    }
    let split = EdgeSplit {
        train_pos,
        val_pos,
        test_pos,
        val_neg,
        test_neg,
        seed,
        warnings,
    };
    let g_train = g.remove_edges(&split.held_out())?;
    Ok((split, g_train))
}

/// Draws `count` distinct unordered non-loop pairs uniformly from those that
/// are neither edges of `g` nor in `exclude`.
pub fn sample_negatives(g: &Graph, count: usize, exclude: &HashSet<Edge>, seed: u64) -> Result<Vec<Edge>> {
    let n = g.node_count();
    let total = n * n.saturating_sub(1) / 2;
    let extra = exclude
        .iter()
        .filter(|e| !e.is_loop() && e.v < n && !g.has_edge(e.u, e.v))
        .count();
    let available = total - g.edge_count() - extra;
    if count > available {
        return Err(Error::InsufficientNonEdges {
            requested: count,
            available,
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let allowed = |e: &Edge| !g.has_edge(e.u, e.v) && !exclude.contains(e);

    if 2 * count <= available {
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            let e = Edge::new(a, b);
            if allowed(&e) && chosen.insert(e) {
                out.push(e);
            }
        }
        Ok(out)
    } else {
        // dense regime: enumerate the candidates and take a random prefix
        let mut pool: Vec<Edge> = (0..n)
            .flat_map(|u| ((u + 1)..n).map(move |v| Edge { u, v }))
            .filter(allowed)
            .collect();
        let (picked, _) = pool.partial_shuffle(&mut rng, count);
        Ok(picked.to_vec())
    }
}
