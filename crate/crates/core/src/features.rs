//! Initial node feature matrices and their orthogonality diagnostics.

use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::{dot, Scalar};

/// Dense row-major `n × k` matrix, one row per node.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T> {
    n: usize,
    k: usize,
    values: Vec<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(n: usize, k: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != n * k {
            return Err(Error::Dimension(format!(
                "{} values cannot fill a {n}x{k} matrix",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Features(format!(
                "non-finite entry at row {}, column {}",
                i / k.max(1),
                i % k.max(1)
            )));
        }
        Ok(FeatureMatrix { n, k, values })
    }

    pub fn zeros(n: usize, k: usize) -> Self {
        FeatureMatrix {
            n,
            k,
            values: vec![T::zero(); n * k],
        }
    }

    /// `n × n` identity.
    pub fn one_hot(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = T::one();
        }
        m
    }

    pub fn random(n: usize, k: usize, kind: RandomKind, seed: u64) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::InvalidParameter("random features need n, k >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = match kind {
            RandomKind::Gaussian => (0..n * k)
                .map(|_| T::of_f64(rng.sample::<f64, _>(StandardNormal)))
                .collect(),
            RandomKind::SparseBinary { density } => {
                if !(density > 0.0 && density <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "density must lie in (0, 1], got {density}"
                    )));
                }
                (0..n * k)
                    .map(|_| {
                        if rng.random::<f64>() < density {
                            T::one()
                        } else {
                            T::zero()
                        }
                    })
                    .collect()
            }
        };
        Ok(FeatureMatrix { n, k, values })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.k + j]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn cast<U: Scalar>(&self) -> FeatureMatrix<U> {
        FeatureMatrix {
            n: self.n,
            k: self.k,
            values: self.values.iter().map(|x| U::of_f64(x.as_f64())).collect(),
        }
    }

    /// Rescales each row to unit norm. Zero rows stay zero.
    pub fn normalize_rows(&self, scheme: RowNorm) -> Self {
        let mut out = self.clone();
        if scheme == RowNorm::None || self.k == 0 {
            return out;
        }
        for row in out.values.chunks_mut(self.k) {
            let norm = match scheme {
                RowNorm::L1 => row.iter().map(|x| x.as_f64().abs()).sum::<f64>(),
                RowNorm::L2 => row.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>().sqrt(),
                RowNorm::None => unreachable!(),
            };
            if norm > 0.0 {
                for x in row.iter_mut() {
                    *x = T::of_f64(x.as_f64() / norm);
                }
            }
        }
        out
    }

    /// Reads a feature file: one line per node, the node token followed by
    /// `k` reals. Every node of `g` must appear exactly once.
    pub fn read<R: BufRead>(reader: R, g: &Graph) -> Result<Self> {
        let n = g.node_count();
        let mut k = None;
        let mut rows: Vec<Option<Vec<T>>> = vec![None; n];
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut tokens = trimmed.split_whitespace();
            let token = tokens.next().expect("non-empty line");
            let id = g.node_id(token).ok_or_else(|| {
                Error::Features(format!("line {}: node '{token}' is not in the graph", i + 1))
            })?;
            let row = tokens
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .map(T::of_f64)
                        .ok_or_else(|| Error::Features(format!("line {}: bad value '{t}'", i + 1)))
                })
                .collect::<Result<Vec<T>>>()?;
            match k {
                None => k = Some(row.len()),
                Some(k) if k != row.len() => {
                    return Err(Error::Features(format!(
                        "line {}: expected {k} values, found {}",
                        i + 1,
                        row.len()
                    )))
                }
                _ => {}
            }
            if rows[id].replace(row).is_some() {
                return Err(Error::Features(format!("line {}: node '{token}' listed twice", i + 1)));
            }
        }
        let k = k.ok_or_else(|| Error::Features("no feature rows".into()))?;
        if k == 0 {
            return Err(Error::Features("feature rows carry no values".into()));
        }
        let mut values = Vec::with_capacity(n * k);
        for (v, row) in rows.into_iter().enumerate() {
            let row = row.ok_or_else(|| Error::Features(format!("node '{}' has no features", g.label(v))))?;
            values.extend(row);
        }
        Ok(FeatureMatrix { n, k, values })
    }

    /// Writes rows in the feature-file format, labelled with the graph's tokens.
    pub fn write<W: Write>(&self, g: &Graph, mut w: W) -> std::io::Result<()> {
        for v in 0..self.n {
            write!(w, "{}", g.label(v))?;
            for x in self.row(v) {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RandomKind {
    Gaussian,
    SparseBinary { density: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowNorm {
    #[default]
    L1,
    L2,
    None,
}

impl FromStr for RowNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(RowNorm::L1),
            "l2" => Ok(RowNorm::L2),
            "none" => Ok(RowNorm::None),
            _ => Err(Error::InvalidParameter(format!("unknown normalization '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairMeasure {
    Inner,
    Cosine,
}

/// Empirical distributions of pairwise feature similarity over connected
/// pairs and over uniformly random node pairs.
#[derive(Clone, Debug)]
pub struct OrthoReport {
    pub measure: PairMeasure,
    pub connected: Vec<f64>,
    pub random: Vec<f64>,
    /// Set when the graph has no edges and the connected sample is empty.
    pub no_edges: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistBin {
    pub low: f64,
    pub high: f64,
    pub connected: usize,
    pub random: usize,
}

pub fn pair_similarity<T: Scalar>(f: &FeatureMatrix<T>, u: usize, v: usize, measure: PairMeasure) -> f64 {
    let (a, b) = (f.row(u), f.row(v));
    let ip = dot(a, b);
    match measure {
        PairMeasure::Inner => ip,
        PairMeasure::Cosine => {
            let na = dot(a, a).sqrt();
            let nb = dot(b, b).sqrt();
            if na == 0.0 || nb == 0.0 {
                0.0
            } else {
                ip / (na * nb)
            }
        }
    }
}

pub fn orthogonality_report<T: Scalar>(
    g: &Graph,
    f: &FeatureMatrix<T>,
    samples: usize,
    seed: u64,
    measure: PairMeasure,
) -> Result<OrthoReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let n = g.node_count();
    if f.rows() != n {
        return Err(Error::Dimension(format!("{} feature rows for {n} nodes", f.rows())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges: Vec<_> = g.edges().collect();
    let connected = if edges.is_empty() {
        Vec::new()
    } else {
        (0..samples)
            .map(|_| {
                let e = edges[rng.random_range(0..edges.len())];
                pair_similarity(f, e.u, e.v, measure)
            })
            .collect()
    };
    let random = if n < 2 {
        Vec::new()
    } else {
        (0..samples)
            .map(|_| {
                let u = rng.random_range(0..n);
                let mut v = rng.random_range(0..n - 1);
                if v >= u {
                    v += 1;
                }
                pair_similarity(f, u, v, measure)
            })
            .collect()
    };
    Ok(OrthoReport {
        measure,
        connected,
        random,
        no_edges: edges.is_empty(),
    })
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

impl OrthoReport {
    pub fn mean_connected(&self) -> f64 {
        mean(&self.connected)
    }

    pub fn mean_random(&self) -> f64 {
        mean(&self.random)
    }

    pub fn mean_abs_random(&self) -> f64 {
        let abs: Vec<f64> = self.random.iter().map(|x| x.abs()).collect();
        mean(&abs)
    }

    /// Shared-range histogram of both samples. The last bin is closed.
    pub fn histogram(&self, bins: usize) -> Vec<HistBin> {
        let bins = bins.max(1);
        let all = self.connected.iter().chain(&self.random);
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        if !lo.is_finite() {
            return Vec::new();
        }
        if lo == hi {
            return vec![HistBin {
                low: lo,
                high: hi,
                connected: self.connected.len(),
                random: self.random.len(),
            }];
        }
        let width = (hi - lo) / bins as f64;
        let mut out: Vec<HistBin> = (0..bins)
            .map(|i| HistBin {
                low: lo + i as f64 * width,
                high: if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width },
                connected: 0,
                random: 0,
            })
            .collect();
        let index = |x: f64| (((x - lo) / width) as usize).min(bins - 1);
        for &x in &self.connected {
            out[index(x)].connected += 1;
        }
        for &x in &self.random {
            out[index(x)].random += 1;
        }
        out
    }

    pub fn write_histogram_csv<W: Write>(&self, bins: usize, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_low,bin_high,count_connected,count_random")?;
        for b in self.histogram(bins) {
            writeln!(w, "{},{},{},{}", b.low, b.high, b.connected, b.random)?;
        }
        Ok(())
    }
}
