//! Parameter-free propagation operators and repeated SpMM.
//!
//! Each variant fixes a normalization of `Ã = A + I`:
//!
//! | variant | operator            | entry `(u, v)`        |
//! |---------|---------------------|-----------------------|
//! | GCN     | `D̃^-1/2 Ã D̃^-1/2`   | `1 / sqrt(d̃_u d̃_v)` |
//! | SAGE    | `D̃^-1 Ã`            | `1 / d̃_u`            |
//! | GIN     | `Ã` (+ `ε I`)       | `1`, diagonal `1 + ε` |
//!
//! `H^(l) = S^l H^(0)` is computed by `l` sparse-times-dense passes; `S^l` is
//! never formed.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::Graph;
use crate::scalar::{dot, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Gcn,
    Sage,
    Gin,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Gcn, Variant::Sage, Variant::Gin];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Gcn => "utgcn",
            Variant::Sage => "utsage",
            Variant::Gin => "utgin",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "utgcn" | "gcn" => Ok(Variant::Gcn),
            "utsage" | "sage" => Ok(Variant::Sage),
            "utgin" | "gin" | "utgraphconv" | "graphconv" => Ok(Variant::Gin),
            _ => Err(Error::InvalidParameter(format!("unknown propagation variant '{s}'"))),
        }
    }
}

/// Sparse operator `S` with the self-loop diagonal materialized.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationOperator<T> {
    variant: Variant,
    epsilon: f64,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> PropagationOperator<T> {
    pub fn build(g: &Graph, variant: Variant, epsilon: f64) -> Self {
        let n = g.node_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(g.targets().len() + n);
        let mut values = Vec::with_capacity(g.targets().len() + n);
        offsets.push(0);
        let weight = |u: usize, v: usize| -> f64 {
            match variant {
                Variant::Gcn => 1.0 / ((g.aug_degree(u) * g.aug_degree(v)) as f64).sqrt(),
                Variant::Sage => 1.0 / g.aug_degree(u) as f64,
                Variant::Gin if u == v => 1.0 + epsilon,
                Variant::Gin => 1.0,
            }
        };
        for u in 0..n {
            let nbrs = g.neighbors(u);
            let split = nbrs.partition_point(|&v| v < u);
            let row = nbrs[..split].iter().chain(std::iter::once(&u)).chain(&nbrs[split..]);
            for &v in row {
                cols.push(v);
                values.push(T::of_f64(weight(u, v)));
            }
            offsets.push(cols.len());
        }
        PropagationOperator {
            variant,
            epsilon,
            offsets,
            cols,
            values,
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Column indices and weights of row `u`, columns ascending.
    pub fn row(&self, u: usize) -> (&[usize], &[T]) {
        let r = self.offsets[u]..self.offsets[u + 1];
        (&self.cols[r.clone()], &self.values[r])
    }

    pub fn entry(&self, u: usize, v: usize) -> T {
        let (cols, vals) = self.row(u);
        match cols.binary_search(&v) {
            Ok(i) => vals[i],
            Err(_) => T::zero(),
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.node_count())
            .map(|u| self.row(u).1.iter().map(|x| x.as_f64()).sum())
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.node_count()).all(|u| {
            let (cols, vals) = self.row(u);
            cols.iter().zip(vals).all(|(&v, &w)| self.entry(v, u) == w)
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.node_count();
        let mut m = vec![vec![0.0; n]; n];
        for (u, row) in m.iter_mut().enumerate() {
            let (cols, vals) = self.row(u);
            for (&v, w) in cols.iter().zip(vals) {
                row[v] = w.as_f64();
            }
        }
        m
    }

    /// Scales the weight of one stored entry by `factor`. Breaks the variant
    /// invariants on purpose; used to check that the identity suite detects
    /// corrupted operators.
    pub fn perturb_entry(&mut self, index: usize, factor: f64) {
        let i = index % self.values.len();
        self.values[i] = T::of_f64(self.values[i].as_f64() * factor);
    }

    /// One SpMM pass `S · H`. Rows are processed in parallel; each output row
    /// is reduced in fixed column order, so the result does not depend on the
    /// thread count.
    pub fn apply(&self, h: &FeatureMatrix<T>) -> Result<FeatureMatrix<T>> {
        let n = self.node_count();
        if h.rows() != n {
            return Err(Error::Dimension(format!(
                "operator has {n} nodes but feature matrix has {} rows",
                h.rows()
            )));
        }
        let k = h.cols();
        let mut out = FeatureMatrix::zeros(n, k);
        if k == 0 {
            return Ok(out);
        }
        out.values_mut()
            .par_chunks_mut(k)
            .enumerate()
            .for_each_init(
                || vec![0.0f64; k],
                |acc, (u, dst)| {
                    acc.iter_mut().for_each(|a| *a = 0.0);
                    let (cols, vals) = self.row(u);
                    for (&v, w) in cols.iter().zip(vals) {
                        let w = w.as_f64();
                        for (a, x) in acc.iter_mut().zip(h.row(v)) {
                            *a += w * x.as_f64();
                        }
                    }
                    for (d, a) in dst.iter_mut().zip(acc.iter()) {
                        *d = T::of_f64(*a);
                    }
                },
            );
        Ok(out)
    }

    /// `S^layers · H`. Zero layers returns a copy of `h`.
    pub fn propagate(&self, h: &FeatureMatrix<T>, layers: usize) -> Result<FeatureMatrix<T>> {
        if h.rows() != self.node_count() {
            return Err(Error::Dimension(format!(
                "operator has {} nodes but feature matrix has {} rows",
                self.node_count(),
                h.rows()
            )));
        }
        let mut cur = h.clone();
        for _ in 0..layers {
            cur = self.apply(&cur)?;
        }
        Ok(cur)
    }
}

/// `⟨h_u, h_v⟩` per pair, accumulated in `f64`.
pub fn inner_product_scores<T: Scalar>(h: &FeatureMatrix<T>, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    let n = h.rows();
    pairs
        .iter()
        .map(|&(u, v)| {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::IndexOutOfRange { index: x, n });
                }
            }
            Ok(dot(h.row(u), h.row(v)))
        })
        .collect()
}
