//! Trainable linear head for the simplified models.
//!
//! A pair is scored by the inner product of its linearly mapped features,
//! `⟨Θ z_u + b, Θ z_v + b⟩`, trained with binary cross-entropy on logits and
//! Adam, with early stopping on validation ROC-AUC.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::{Edge, Graph};
use crate::metrics::roc_auc;
use crate::scalar::{dot, Scalar};
use crate::seed::derive_seed;
use crate::split::{sample_negatives, EdgeSplit};

/// `Θ ∈ R^{hidden × input}` plus an optional bias, stored contiguously
/// (`Θ` row-major, then the bias) so the optimizer sees one flat vector.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearHead<T> {
    hidden: usize,
    input: usize,
    has_bias: bool,
    params: Vec<T>,
}

impl<T: Scalar> LinearHead<T> {
    pub fn new(hidden: usize, input: usize, theta: Vec<T>, bias: Option<Vec<T>>) -> Result<Self> {
        if hidden == 0 || input == 0 {
            return Err(Error::InvalidParameter("linear head needs hidden, input >= 1".into()));
        }
        if theta.len() != hidden * input {
            return Err(Error::Dimension(format!(
                "theta has {} entries, expected {hidden}x{input}",
                theta.len()
            )));
        }
        let has_bias = bias.is_some();
        let mut params = theta;
        if let Some(b) = bias {
            if b.len() != hidden {
                return Err(Error::Dimension(format!("bias has {} entries, expected {hidden}", b.len())));
            }
            params.extend(b);
        }
        if params.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("linear head entries must be finite".into()));
        }
        Ok(LinearHead {
            hidden,
            input,
            has_bias,
            params,
        })
    }

    pub fn identity(k: usize) -> Self {
        let features = FeatureMatrix::<T>::one_hot(k);
        LinearHead::new(k, k, features.values().to_vec(), None).expect("identity is well formed")
    }

    /// Fan-in uniform initialization in `±sqrt(1/input)`; bias starts at zero.
    pub fn init_uniform(hidden: usize, input: usize, bias: bool, seed: u64) -> Result<Self> {
        let bound = (1.0 / input.max(1) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = (0..hidden * input)
            .map(|_| T::of_f64(rng.random_range(-bound..=bound)))
            .collect();
        LinearHead::new(hidden, input, theta, bias.then(|| vec![T::zero(); hidden]))
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input(&self) -> usize {
        self.input
    }

    pub fn theta(&self) -> &[T] {
        &self.params[..self.hidden * self.input]
    }

    pub fn bias(&self) -> Option<&[T]> {
        self.has_bias.then(|| &self.params[self.hidden * self.input..])
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for x in out.params.iter_mut() {
            *x = T::of_f64(x.as_f64() * c);
        }
        out
    }

    fn check_input(&self, z: &FeatureMatrix<T>) -> Result<()> {
        if z.cols() != self.input {
            return Err(Error::Dimension(format!(
                "features have {} columns, head expects {}",
                z.cols(),
                self.input
            )));
        }
        Ok(())
    }

    /// `Θ z_u + b` in `f64`. Sparse rows skip zero entries; dense rows use
    /// four interleaved partial sums. Either way the order is fixed by `z`.
    fn embed_row(&self, z: &[T]) -> Vec<f64> {
        let theta = self.theta();
        let k = self.input;
        let nnz = z.iter().filter(|x| !x.is_zero()).count();
        let bias = |i: usize, acc: f64| match self.bias() {
            Some(b) => acc + b[i].as_f64(),
            None => acc,
        };
        if 4 * nnz < k {
            let nz: Vec<(usize, f64)> = z
                .iter()
                .enumerate()
                .filter(|(_, x)| !x.is_zero())
                .map(|(j, x)| (j, x.as_f64()))
                .collect();
            (0..self.hidden)
                .map(|i| {
                    let row = &theta[i * k..(i + 1) * k];
                    bias(i, nz.iter().fold(0.0, |acc, &(j, x)| acc + row[j].as_f64() * x))
                })
                .collect()
        } else {
            let zf: Vec<f64> = z.iter().map(|x| x.as_f64()).collect();
            (0..self.hidden)
                .map(|i| {
                    let row = &theta[i * k..(i + 1) * k];
                    let mut lanes = [0.0f64; 4];
                    let mut chunks = row.chunks_exact(4).zip(zf.chunks_exact(4));
                    for (t, x) in &mut chunks {
                        for l in 0..4 {
                            lanes[l] += t[l].as_f64() * x[l];
                        }
                    }
                    let tail = k - k % 4;
                    let mut acc = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
                    for j in tail..k {
                        acc += row[j].as_f64() * zf[j];
                    }
                    bias(i, acc)
                })
                .collect()
        }
    }

    fn embed(&self, z: &FeatureMatrix<T>, pairs: &[(usize, usize)]) -> Result<Embedding> {
        let n = z.rows();
        let mut slot = vec![usize::MAX; n];
        let mut nodes = Vec::new();
        for &(u, v) in pairs {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::IndexOutOfRange { index: x, n });
                }
                if slot[x] == usize::MAX {
                    slot[x] = nodes.len();
                    nodes.push(x);
                }
            }
        }
        let rows = nodes.par_iter().map(|&x| self.embed_row(z.row(x))).collect();
        Ok(Embedding { slot, nodes, rows })
    }

    /// Logits `⟨Θ z_u + b, Θ z_v + b⟩`; symmetric in `(u, v)`.
    pub fn score_pairs(&self, z: &FeatureMatrix<T>, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
        self.check_input(z)?;
        let emb = self.embed(z, pairs)?;
        Ok(pairs
            .iter()
            .map(|&(u, v)| dot(emb.row(u), emb.row(v)))
            .collect())
    }

    /// Mean binary cross-entropy over positives (label 1) and negatives
    /// (label 0), with its analytic gradient in the flat parameter layout.
    pub fn loss_and_grad(
        &self,
        z: &FeatureMatrix<T>,
        pos: &[(usize, usize)],
        neg: &[(usize, usize)],
    ) -> Result<(f64, Vec<f64>)> {
        self.check_input(z)?;
        let total = pos.len() + neg.len();
        if total == 0 {
            return Err(Error::InvalidParameter("loss needs at least one pair".into()));
        }
        let all: Vec<(usize, usize)> = pos.iter().chain(neg).copied().collect();
        let emb = self.embed(z, &all)?;
        Ok(self.loss_from(z, &emb, &all, pos.len()))
    }

    /// Every row of `z` embedded, in node order.
    fn embed_all(&self, z: &FeatureMatrix<T>) -> Embedding {
        let nodes: Vec<usize> = (0..z.rows()).collect();
        let rows = nodes.par_iter().map(|&x| self.embed_row(z.row(x))).collect();
        Embedding {
            slot: nodes.clone(),
            nodes,
            rows,
        }
    }

    /// Loss and gradient from a precomputed embedding; the first `n_pos`
    /// pairs of `all` are positives.
    fn loss_from(&self, z: &FeatureMatrix<T>, emb: &Embedding, all: &[(usize, usize)], n_pos: usize) -> (f64, Vec<f64>) {
        let total = all.len();
        let scale = 1.0 / total as f64;
        let h = self.hidden;

        let mut loss = 0.0;
        let mut d_emb = vec![0.0f64; emb.nodes.len() * h];
        for (idx, &(u, v)) in all.iter().enumerate() {
            let label = if idx < n_pos { 1.0 } else { 0.0 };
            let logit = dot(emb.row(u), emb.row(v));
            loss += bce_with_logits(logit, label);
            let g = (sigmoid(logit) - label) * scale;
            let (su, sv) = (emb.slot[u], emb.slot[v]);
            for i in 0..h {
                let (au, av) = (emb.rows[su][i], emb.rows[sv][i]);
                d_emb[su * h + i] += g * av;
                d_emb[sv * h + i] += g * au;
            }
        }
        loss *= scale;

        let k = self.input;
        let mut grad = vec![0.0f64; self.params.len()];
        let (d_theta, d_bias) = grad.split_at_mut(h * k);
        d_theta.par_chunks_mut(k).enumerate().for_each(|(i, row)| {
            for (s, &x) in emb.nodes.iter().enumerate() {
                let gi = d_emb[s * h + i];
                if gi == 0.0 {
                    continue;
                }
                for (r, zx) in row.iter_mut().zip(z.row(x)) {
                    *r += gi * zx.as_f64();
                }
            }
        });
        if self.has_bias {
            for s in 0..emb.nodes.len() {
                for i in 0..h {
                    d_bias[i] += d_emb[s * h + i];
                }
            }
        }
        (loss, grad)
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "linear_head {} {} {}", self.hidden, self.input, u8::from(self.has_bias))?;
        for row in self.theta().chunks(self.input) {
            let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        if let Some(b) = self.bias() {
            let line: Vec<String> = b.iter().map(|x| x.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let bad = |m: &str| Error::Features(format!("linear head file: {m}"));
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| bad("empty"))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "linear_head" {
            return Err(bad("missing 'linear_head <hidden> <input> <bias>' header"));
        }
        let hidden: usize = parts[1].parse().map_err(|_| bad("bad hidden dim"))?;
        let input: usize = parts[2].parse().map_err(|_| bad("bad input dim"))?;
        let has_bias = parts[3] == "1";
        let mut values = Vec::new();
        for line in lines {
            for t in line?.split_whitespace() {
                let x: f64 = t.parse().map_err(|_| bad("bad value"))?;
                values.push(T::of_f64(x));
            }
        }
        let expected = hidden * input + if has_bias { hidden } else { 0 };
        if values.len() != expected {
            return Err(bad(&format!("expected {expected} values, found {}", values.len())));
        }
        let bias = has_bias.then(|| values.split_off(hidden * input));
        LinearHead::new(hidden, input, values, bias)
    }
}

struct Embedding {
    slot: Vec<usize>,
    nodes: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl Embedding {
    fn row(&self, x: usize) -> &[f64] {
        &self.rows[self.slot[x]]
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln σ(x) + (1-y) ln(1-σ(x))]` in overflow-free form.
pub fn bce_with_logits(x: f64, y: f64) -> f64 {
    x.max(0.0) - x * y + (-x.abs()).exp().ln_1p()
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        AdamState {
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Bias-corrected Adam update of `params` in place.
    pub fn step<T: Scalar>(&mut self, params: &mut [T], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "adam state has {} slots, got {} params and {} gradients",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            let p = params[i].as_f64() - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            params[i] = T::of_f64(p);
        }
        Ok(())
    }
}

/// Tracks the best validation score; ties keep the earliest epoch.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::NEG_INFINITY,
            best_epoch: 0,
            since_best: 0,
        }
    }

    /// Records an epoch score; returns true if it is a new best.
    pub fn observe(&mut self, epoch: usize, score: f64) -> bool {
        if score > self.best {
            self.best = score;
            self.best_epoch = epoch;
            self.since_best = 0;
            true
        } else {
            self.since_best += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_best >= self.patience
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub hidden_dim: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub bias: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            hidden_dim: 64,
            max_epochs: 10_000,
            patience: 250,
            bias: false,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_auc: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl History {
    pub fn best_val_auc(&self) -> f64 {
        self.epochs
            .iter()
            .find(|r| r.epoch == self.best_epoch)
            .map_or(f64::NAN, |r| r.val_auc)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,loss,val_auc")?;
        for r in &self.epochs {
            writeln!(w, "{},{},{}", r.epoch, r.loss, r.val_auc)?;
        }
        Ok(())
    }
}

pub(crate) fn as_pairs(edges: &[Edge]) -> Vec<(usize, usize)> {
    edges.iter().map(|e| (e.u, e.v)).collect()
}

/// Full-batch training of a linear head on fixed features `z`.
///
/// Every epoch draws a fresh set of training negatives (as many as training
/// positives) from the non-edges of the full graph, takes one Adam step and
/// scores the frozen validation pairs. Returns the parameters of the epoch
/// with the highest validation AUC.
pub fn train<T: Scalar>(
    z: &FeatureMatrix<T>,
    split: &EdgeSplit,
    cfg: &TrainConfig,
    g_train: &Graph,
) -> Result<(LinearHead<T>, History)> {
    if cfg.max_epochs == 0 || cfg.patience == 0 {
        return Err(Error::InvalidParameter("max_epochs and patience must be >= 1".into()));
    }
    if split.train_pos.is_empty() {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    if split.val_pos.is_empty() || split.val_neg.is_empty() {
        return Err(Error::InvalidParameter("validation set is empty; early stopping undefined".into()));
    }
    if z.rows() != g_train.node_count() {
        return Err(Error::Dimension(format!(
            "{} feature rows for {} nodes",
            z.rows(),
            g_train.node_count()
        )));
    }
    let n = z.rows();
    let positives: HashSet<Edge> = split.all_positives().collect();
    let train_pos = as_pairs(&split.train_pos);
    let val_pos = as_pairs(&split.val_pos);
    let val_neg = as_pairs(&split.val_neg);

    let mut head = LinearHead::<T>::init_uniform(cfg.hidden_dim, z.cols(), cfg.bias, derive_seed(cfg.seed, 0))?;
    let mut adam = AdamState::new(head.params().len(), cfg.learning_rate);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = head.clone();
    let mut history = History::default();

    let check = |x: usize| if x < n { Ok(()) } else { Err(Error::IndexOutOfRange { index: x, n }) };
    for &(u, v) in train_pos.iter().chain(&val_pos).chain(&val_neg) {
        check(u)?;
        check(v)?;
    }
    // embedding of the current parameters, shared by validation and the next gradient
    let mut emb = head.embed_all(z);
    for epoch in 1..=cfg.max_epochs {
        let neg_seed = derive_seed(cfg.seed, epoch as u64);
        let neg = sample_negatives(g_train, train_pos.len(), &positives, neg_seed)?;
        let mut pairs = train_pos.clone();
        pairs.extend(as_pairs(&neg));
        let (loss, grad) = head.loss_from(z, &emb, &pairs, train_pos.len());
        adam.step(head.params_mut(), &grad)?;
        emb = head.embed_all(z);

        let score = |ps: &[(usize, usize)]| -> Vec<f64> { ps.iter().map(|&(u, v)| dot(emb.row(u), emb.row(v))).collect() };
        let val_auc = roc_auc(&score(&val_pos), &score(&val_neg))?;
        history.epochs.push(EpochRecord { epoch, loss, val_auc });
        if stopper.observe(epoch, val_auc) {
            best = head.clone();
        }
        if stopper.should_stop() {
            break;
        }
    }
    history.best_epoch = stopper.best_epoch();
    Ok((best, history))
}
