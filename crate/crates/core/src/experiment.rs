//! Multi-run link-prediction experiments, cross-validated grid search and
//! depth sweeps.
//!
//! Every run `r` draws its randomness from `derive_seed(master, r)`: the
//! split uses that run seed directly, features use `derive_seed(run, 3)` and
//! the linear head uses `derive_seed(run, 4)`.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::classifier::{as_pairs, train, TrainConfig};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, RandomKind, RowNorm};
use crate::graph::{Edge, Graph};
use crate::io::read_graph;
use crate::metrics::{roc_auc, summarize, Summary};
use crate::paths::{neighborhood_heuristics, triadic_measures, truncated_series, DegreeConvention, SeriesKind, SeriesParams};
use crate::propagation::{inner_product_scores, PropagationOperator, Variant};
use crate::scalar::Scalar;
use crate::seed::derive_seed;
use crate::split::{sample_negatives, split_edges, EdgeSplit};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Heuristic {
    CommonNeighbors,
    DegreeNormalized,
    DegreeWeighted,
    AdamicAdar,
    ResourceAllocation,
    Series(SeriesKind),
}

/// A link scoring method.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Inner products of propagated features, no parameters.
    Untrained(Variant),
    /// Propagated features followed by a trained linear head.
    Simplified(Variant),
    Heuristic(Heuristic),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Untrained(v) => v.name().to_string(),
            Method::Simplified(v) => format!("s{}", &v.name()[2..]),
            Method::Heuristic(h) => match h {
                Heuristic::CommonNeighbors => "cn",
                Heuristic::DegreeNormalized => "td",
                Heuristic::DegreeWeighted => "tn",
                Heuristic::AdamicAdar => "aa",
                Heuristic::ResourceAllocation => "ra",
                Heuristic::Series(SeriesKind::Katz) => "katz",
                Heuristic::Series(SeriesKind::RootedPageRank) => "rpr",
                Heuristic::Series(SeriesKind::SimRank) => "simrank",
            }
            .to_string(),
        }
    }

    pub fn variant(&self) -> Option<Variant> {
        match self {
            Method::Untrained(v) | Method::Simplified(v) => Some(*v),
            Method::Heuristic(_) => None,
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self, Method::Simplified(_))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        let h = match lower.as_str() {
            "cn" => Some(Heuristic::CommonNeighbors),
            "td" => Some(Heuristic::DegreeNormalized),
            "tn" => Some(Heuristic::DegreeWeighted),
            "aa" => Some(Heuristic::AdamicAdar),
            "ra" => Some(Heuristic::ResourceAllocation),
            other => other.parse::<SeriesKind>().ok().map(Heuristic::Series),
        };
        if let Some(h) = h {
            return Ok(Method::Heuristic(h));
        }
        if let Ok(v) = lower.parse::<Variant>() {
            return Ok(Method::Untrained(v));
        }
        if let Some(rest) = lower.strip_prefix('s') {
            if let Ok(v) = rest.parse::<Variant>() {
                return Ok(Method::Simplified(v));
            }
        }
        Err(Error::InvalidParameter(format!("unknown method '{s}'")))
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureInit {
    OneHot,
    Gaussian,
    SparseBinary,
}

impl FromStr for FeatureInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "onehot" | "one_hot" | "one-hot" => Ok(FeatureInit::OneHot),
            "gaussian" | "normal" => Ok(FeatureInit::Gaussian),
            "sparse" | "sparse_binary" | "sparse-binary" => Ok(FeatureInit::SparseBinary),
            _ => Err(Error::InvalidParameter(format!("unknown feature init '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f32" | "single" => Ok(Precision::F32),
            "f64" | "double" => Ok(Precision::F64),
            _ => Err(Error::InvalidParameter(format!("unknown precision '{s}'"))),
        }
    }
}

/// Everything that determines an experiment. Parsed from flat `key=value`
/// text; [`ExperimentConfig::set`] applies single overrides.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub init: FeatureInit,
    pub dim: usize,
    pub density: f64,
    pub normalization: RowNorm,
    pub method: Method,
    pub layers: usize,
    pub epsilon: f64,
    pub runs: usize,
    pub seed: u64,
    pub test_frac: f64,
    pub val_frac: f64,
    pub leak_full_graph: bool,
    pub hidden: usize,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub bias: bool,
    pub gamma: Option<f64>,
    pub max_len: Option<usize>,
    pub classical_degree: bool,
    pub precision: Precision,
    pub folds: usize,
    pub grid_layers: Vec<usize>,
    pub grid_lr: Vec<f64>,
    pub grid_hidden: Vec<usize>,
    pub depths: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        ExperimentConfig {
            dataset: None,
            features: None,
            init: FeatureInit::OneHot,
            dim: 64,
            density: 0.1,
            normalization: RowNorm::L1,
            method: Method::Untrained(Variant::Gcn),
            layers: 2,
            epsilon: 0.0,
            runs: 10,
            seed: 0,
            test_frac: 0.10,
            val_frac: 0.05,
            leak_full_graph: false,
            hidden: train.hidden_dim,
            lr: train.learning_rate,
            max_epochs: train.max_epochs,
            patience: train.patience,
            bias: train.bias,
            gamma: None,
            max_len: None,
            classical_degree: false,
            precision: Precision::F64,
            folds: 3,
            grid_layers: vec![1, 2, 3],
            grid_lr: vec![0.2, 0.1, 0.01, 0.001, 0.0001],
            grid_hidden: vec![16, 64, 128],
            depths: (1..=6).collect(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}' for '{key}'"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_value(key, t))
        .collect()
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip_prefix(&e))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Applies one setting. Keys accept `-` or `_` as separator.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key.replace('-', "_");
        let usage = |e: Error| Error::Config(format!("{k}: {}", strip_prefix(&e)));
        match k.as_str() {
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "features" => self.features = (!value.is_empty()).then(|| PathBuf::from(value)),
            "init" => self.init = value.parse().map_err(usage)?,
            "dim" => self.dim = parse_value(&k, value)?,
            "density" => self.density = parse_value(&k, value)?,
            "normalization" | "norm" => self.normalization = value.parse().map_err(usage)?,
            "method" => self.method = value.parse().map_err(usage)?,
            "layers" => self.layers = parse_value(&k, value)?,
            "epsilon" => self.epsilon = parse_value(&k, value)?,
            "runs" => self.runs = parse_value(&k, value)?,
            "seed" => self.seed = parse_value(&k, value)?,
            "test_frac" => self.test_frac = parse_value(&k, value)?,
            "val_frac" => self.val_frac = parse_value(&k, value)?,
            "leak_full_graph" => self.leak_full_graph = parse_bool(&k, value)?,
            "hidden" => self.hidden = parse_value(&k, value)?,
            "lr" => self.lr = parse_value(&k, value)?,
            "max_epochs" => self.max_epochs = parse_value(&k, value)?,
            "patience" => self.patience = parse_value(&k, value)?,
            "bias" => self.bias = parse_bool(&k, value)?,
            "gamma" => self.gamma = Some(parse_value(&k, value)?),
            "max_len" => self.max_len = Some(parse_value(&k, value)?),
            "classical_degree" => self.classical_degree = parse_bool(&k, value)?,
            "precision" => self.precision = value.parse().map_err(usage)?,
            "folds" => self.folds = parse_value(&k, value)?,
            "grid_layers" => self.grid_layers = parse_list(&k, value)?,
            "grid_lr" => self.grid_lr = parse_list(&k, value)?,
            "grid_hidden" => self.grid_hidden = parse_list(&k, value)?,
            "depths" => self.depths = parse_list(&k, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.runs == 0 {
            return bad("runs must be >= 1");
        }
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad("density must lie in (0, 1]");
        }
        if self.folds < 2 {
            return bad("folds must be >= 2");
        }
        if self.hidden == 0 || self.max_epochs == 0 || self.patience == 0 {
            return bad("hidden, max_epochs and patience must be >= 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !self.epsilon.is_finite() {
            return bad("epsilon must be finite");
        }
        if let Method::Heuristic(Heuristic::Series(kind)) = self.method {
            self.series_params(kind)?;
        }
        Ok(())
    }

    pub fn series_params(&self, kind: SeriesKind) -> Result<SeriesParams> {
        let d = SeriesParams::default_for(kind);
        SeriesParams::new(self.gamma.unwrap_or(d.gamma()), self.max_len.unwrap_or(d.max_len()))
            .map_err(|e| Error::Config(strip_prefix(&e)))
    }

    pub fn degree_convention(&self) -> DegreeConvention {
        if self.classical_degree {
            DegreeConvention::Classical
        } else {
            DegreeConvention::Augmented
        }
    }

    pub fn train_config(&self, lr: f64, hidden: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: lr,
            hidden_dim: hidden,
            max_epochs: self.max_epochs,
            patience: self.patience,
            bias: self.bias,
            seed,
        }
    }

    /// Hex SHA-256 of the canonical rendering of this configuration.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(format!("{self:?}").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::InvalidParameter(m) | Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

/// A graph with optional node attributes.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: Option<FeatureMatrix<f64>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, graph: Graph) -> Self {
        Dataset {
            name: name.into(),
            graph,
            features: None,
        }
    }

    /// Loads the edge list and, if configured, the feature file.
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let path = cfg
            .dataset
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset given".into()))?;
        let (graph, _) = read_graph(path)?;
        let name = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        let features = match &cfg.features {
            Some(fp) => {
                let file = fs::File::open(fp)?;
                Some(FeatureMatrix::read(std::io::BufReader::new(file), &graph)?)
            }
            None => None,
        };
        Ok(Dataset { name, graph, features })
    }

    /// `H⁽⁰⁾` for one run, row-normalized per the configuration.
    pub fn initial_features(&self, cfg: &ExperimentConfig, seed: u64) -> Result<FeatureMatrix<f64>> {
        let n = self.graph.node_count();
        let raw = match (&self.features, cfg.init) {
            (Some(f), _) => f.clone(),
            (None, FeatureInit::OneHot) => FeatureMatrix::one_hot(n),
            (None, FeatureInit::Gaussian) => FeatureMatrix::random(n, cfg.dim, RandomKind::Gaussian, seed)?,
            (None, FeatureInit::SparseBinary) => FeatureMatrix::random(
                n,
                cfg.dim,
                RandomKind::SparseBinary { density: cfg.density },
                seed,
            )?,
        };
        Ok(raw.normalize_rows(cfg.normalization))
    }
}

fn propagated<T: Scalar>(g: &Graph, variant: Variant, epsilon: f64, h0: &FeatureMatrix<f64>, layers: usize) -> Result<FeatureMatrix<T>> {
    PropagationOperator::<T>::build(g, variant, epsilon).propagate(&h0.cast::<T>(), layers)
}

/// Scores `pairs` with a parameter-free method on the message-passing graph
/// `g`. Trainable methods are rejected.
pub fn score_untrained(
    method: Method,
    g: &Graph,
    h0: &FeatureMatrix<f64>,
    cfg: &ExperimentConfig,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    match method {
        Method::Untrained(v) => match cfg.precision {
            Precision::F64 => inner_product_scores(&propagated::<f64>(g, v, cfg.epsilon, h0, cfg.layers)?, pairs),
            Precision::F32 => inner_product_scores(&propagated::<f32>(g, v, cfg.epsilon, h0, cfg.layers)?, pairs),
        },
        Method::Simplified(_) => Err(Error::InvalidParameter(format!(
            "method {method} needs a trained head; use eval"
        ))),
        Method::Heuristic(h) => score_heuristic(h, g, cfg, pairs),
    }
}

fn score_heuristic(h: Heuristic, g: &Graph, cfg: &ExperimentConfig, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    if let Heuristic::Series(kind) = h {
        return truncated_series(g, kind, cfg.series_params(kind)?, pairs);
    }
    pairs
        .iter()
        .map(|&(u, v)| {
            Ok(match h {
                Heuristic::CommonNeighbors => triadic_measures(g, u, v)?.t,
                Heuristic::DegreeNormalized => triadic_measures(g, u, v)?.t_d,
                Heuristic::DegreeWeighted => triadic_measures(g, u, v)?.t_n,
                Heuristic::AdamicAdar => neighborhood_heuristics(g, u, v, cfg.degree_convention())?.adamic_adar,
                Heuristic::ResourceAllocation => {
                    neighborhood_heuristics(g, u, v, cfg.degree_convention())?.resource_allocation
                }
                Heuristic::Series(_) => unreachable!(),
            })
        })
        .collect()
}

/// Hyperparameters for one fit. `lr` and `hidden` are only meaningful for
/// trainable methods.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub layers: usize,
    pub lr: Option<f64>,
    pub hidden: Option<usize>,
}

impl GridPoint {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        let trainable = cfg.method.is_trainable();
        GridPoint {
            layers: cfg.layers,
            lr: trainable.then_some(cfg.lr),
            hidden: trainable.then_some(cfg.hidden),
        }
    }
}

struct Fit<'a> {
    ds: &'a Dataset,
    cfg: &'a ExperimentConfig,
    point: GridPoint,
    feature_seed: u64,
    train_seed: u64,
}

impl Fit<'_> {
    /// Fits on `split` (propagating over `g_prop`) and returns the AUC on
    /// the given evaluation pairs.
    fn auc(&self, split: &EdgeSplit, g_prop: &Graph, g_train: &Graph, pos: &[Edge], neg: &[Edge]) -> Result<f64> {
        let (pos, neg) = (as_pairs(pos), as_pairs(neg));
        let mut cfg = self.cfg.clone();
        cfg.layers = self.point.layers;
        match self.cfg.method {
            Method::Simplified(v) => {
                let h0 = self.ds.initial_features(&cfg, self.feature_seed)?;
                let tc = cfg.train_config(
                    self.point.lr.unwrap_or(cfg.lr),
                    self.point.hidden.unwrap_or(cfg.hidden),
                    self.train_seed,
                );
                match cfg.precision {
                    Precision::F64 => simplified_auc::<f64>(g_prop, g_train, v, &cfg, &h0, split, &tc, &pos, &neg),
                    Precision::F32 => simplified_auc::<f32>(g_prop, g_train, v, &cfg, &h0, split, &tc, &pos, &neg),
                }
            }
            Method::Untrained(_) => {
                let h0 = self.ds.initial_features(&cfg, self.feature_seed)?;
                let mut all = pos.clone();
                all.extend_from_slice(&neg);
                let scores = score_untrained(cfg.method, g_prop, &h0, &cfg, &all)?;
                roc_auc(&scores[..pos.len()], &scores[pos.len()..])
            }
            Method::Heuristic(h) => {
                let p = score_heuristic(h, g_prop, &cfg, &pos)?;
                let n = score_heuristic(h, g_prop, &cfg, &neg)?;
                roc_auc(&p, &n)
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn simplified_auc<T: Scalar>(
    g_prop: &Graph,
    g_train: &Graph,
    variant: Variant,
    cfg: &ExperimentConfig,
    h0: &FeatureMatrix<f64>,
    split: &EdgeSplit,
    tc: &TrainConfig,
    pos: &[(usize, usize)],
    neg: &[(usize, usize)],
) -> Result<f64> {
    let z = propagated::<T>(g_prop, variant, cfg.epsilon, h0, cfg.layers)?;
    let (head, _) = train(&z, split, tc, g_train)?;
    roc_auc(&head.score_pairs(&z, pos)?, &head.score_pairs(&z, neg)?)
}

/// Per-run test AUCs of one configuration with their aggregate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub dataset: String,
    pub method: Method,
    pub point: GridPoint,
    pub per_run_auc: Vec<f64>,
    pub seeds: Vec<u64>,
    pub mean: f64,
    pub std: f64,
    pub std_sample: f64,
    pub fingerprint: String,
}

fn opt<T: fmt::Display>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

impl ExperimentResult {
    pub fn summary(&self) -> Summary {
        Summary {
            mean: self.mean,
            std: self.std,
            std_sample: self.std_sample,
        }
    }

    pub fn summary_line(&self) -> String {
        format!("mean={:.4}, std={:.4}", self.mean, self.std)
    }

    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "dataset,method,layers,hidden,lr,run,seed,auc")?;
        let layers = if matches!(self.method, Method::Heuristic(_)) {
            String::new()
        } else {
            self.point.layers.to_string()
        };
        for (run, (auc, seed)) in self.per_run_auc.iter().zip(&self.seeds).enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                self.dataset,
                self.method,
                layers,
                opt(self.point.hidden),
                opt(self.point.lr),
                run,
                seed,
                auc
            )?;
        }
        writeln!(w, "mean,std,std_sample")?;
        writeln!(w, "{},{},{}", self.mean, self.std, self.std_sample)
    }
}

/// Runs `cfg.runs` independent splits in parallel and reports the test AUC
/// of each.
pub fn run_experiment(ds: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let point = GridPoint::from_config(cfg);
    let seeds: Vec<u64> = (0..cfg.runs as u64).map(|r| derive_seed(cfg.seed, r)).collect();
    let per_run_auc = seeds
        .par_iter()
        .enumerate()
        .map(|(run, &seed)| run_once(ds, cfg, point, seed).map_err(|e| Error::Run { run, source: Box::new(e) }))
        .collect::<Result<Vec<f64>>>()?;
    let s = summarize(&per_run_auc);
    Ok(ExperimentResult {
        dataset: ds.name.clone(),
        method: cfg.method,
        point,
        per_run_auc,
        seeds,
        mean: s.mean,
        std: s.std,
        std_sample: s.std_sample,
        fingerprint: cfg.fingerprint(),
    })
}

fn run_once(ds: &Dataset, cfg: &ExperimentConfig, point: GridPoint, seed: u64) -> Result<f64> {
    let (split, g_train) = split_edges(&ds.graph, cfg.test_frac, cfg.val_frac, seed)?;
    if split.test_pos.is_empty() {
        return Err(Error::InvalidParameter("test set is empty".into()));
    }
    let g_prop = if cfg.leak_full_graph { &ds.graph } else { &g_train };
    let fit = Fit {
        ds,
        cfg,
        point,
        feature_seed: derive_seed(seed, 3),
        train_seed: derive_seed(seed, 4),
    };
    fit.auc(&split, g_prop, &g_train, &split.test_pos, &split.test_neg)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvRow {
    pub point: GridPoint,
    pub folds: Vec<f64>,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridResult {
    pub rows: Vec<CvRow>,
    pub best: GridPoint,
    pub fits: usize,
    pub notices: Vec<String>,
}

impl GridResult {
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        let k = self.rows.first().map_or(0, |r| r.folds.len());
        let folds: Vec<String> = (1..=k).map(|i| format!("fold_{i}")).collect();
        writeln!(w, "layers,lr,hidden,{},mean_auc", folds.join(","))?;
        for r in &self.rows {
            let aucs: Vec<String> = r.folds.iter().map(|a| a.to_string()).collect();
            writeln!(
                w,
                "{},{},{},{},{}",
                r.point.layers,
                opt(r.point.lr),
                opt(r.point.hidden),
                aucs.join(","),
                r.mean
            )?;
        }
        Ok(())
    }
}

/// The grid points implied by the configuration: all of
/// `layers × lr × hidden` for trainable methods, `layers` alone otherwise.
pub fn grid_points(cfg: &ExperimentConfig) -> Result<(Vec<GridPoint>, Vec<String>)> {
    if matches!(cfg.method, Method::Heuristic(_)) {
        return Err(Error::InvalidParameter(format!(
            "method {} has no hyperparameter grid",
            cfg.method
        )));
    }
    if cfg.grid_layers.is_empty() {
        return Err(Error::InvalidParameter("empty layers grid".into()));
    }
    let mut notices = Vec::new();
    let mut points = Vec::new();
    if cfg.method.is_trainable() {
        if cfg.grid_lr.is_empty() || cfg.grid_hidden.is_empty() {
            return Err(Error::InvalidParameter("empty learning-rate or hidden-dim grid".into()));
        }
        for &layers in &cfg.grid_layers {
            for &lr in &cfg.grid_lr {
                for &hidden in &cfg.grid_hidden {
                    points.push(GridPoint {
                        layers,
                        lr: Some(lr),
                        hidden: Some(hidden),
                    });
                }
            }
        }
    } else {
        if !cfg.grid_lr.is_empty() || !cfg.grid_hidden.is_empty() {
            notices.push(format!(
                "method {} is untrained: only the layers axis applies, lr and hidden axes ignored",
                cfg.method
            ));
        }
        points.extend(cfg.grid_layers.iter().map(|&layers| GridPoint {
            layers,
            lr: None,
            hidden: None,
        }));
    }
    Ok((points, notices))
}

/// Exhaustive grid search with k-fold cross-validation over the training
/// and validation positives of one split; test edges are never used.
///
/// Each fold holds out one part as validation positives with freshly drawn
/// negatives; the remaining parts are the training positives. Message
/// passing runs on the graph without the fold and the test edges.
pub fn grid_search(ds: &Dataset, cfg: &ExperimentConfig) -> Result<GridResult> {
    cfg.validate()?;
    let (points, notices) = grid_points(cfg)?;
    let cv_seed = derive_seed(cfg.seed, 0);
    let (outer, _) = split_edges(&ds.graph, cfg.test_frac, cfg.val_frac, cv_seed)?;
    let mut pool: Vec<Edge> = outer.train_pos.iter().chain(&outer.val_pos).copied().collect();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cv_seed, 7)));
    let k = cfg.folds;
    if pool.len() < k {
        return Err(Error::InvalidParameter(format!("{} edges cannot fill {k} folds", pool.len())));
    }
    let exclude: HashSet<Edge> = outer.test_neg.iter().copied().collect();
    let folds = (0..k)
        .map(|f| {
            let held: Vec<Edge> = pool.iter().skip(f).step_by(k).copied().collect();
            let rest: Vec<Edge> = pool
                .iter()
                .enumerate()
                .filter(|(i, _)| i % k != f)
                .map(|(_, e)| *e)
                .collect();
            let neg = sample_negatives(&ds.graph, held.len(), &exclude, derive_seed(cv_seed, 10 + f as u64))?;
            let split = EdgeSplit {
                train_pos: rest,
                val_pos: held,
                test_pos: outer.test_pos.clone(),
                val_neg: neg,
                test_neg: outer.test_neg.clone(),
                seed: cv_seed,
                warnings: Vec::new(),
            };
            let g_fold = ds.graph.remove_edges(&split.held_out())?;
            Ok((split, g_fold))
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..k).map(move |f| (p, f))).collect();
    let aucs = jobs
        .par_iter()
        .map(|&(p, f)| {
            let (split, g_fold) = &folds[f];
            let g_prop = if cfg.leak_full_graph { &ds.graph } else { g_fold };
            let fit = Fit {
                ds,
                cfg,
                point: points[p],
                feature_seed: derive_seed(cv_seed, 3),
                train_seed: derive_seed(cv_seed, 4),
            };
            fit.auc(split, g_prop, g_fold, &split.val_pos, &split.val_neg)
        })
        .collect::<Result<Vec<f64>>>()?;

    let rows: Vec<CvRow> = points
        .iter()
        .enumerate()
        .map(|(p, &point)| {
            let folds = aucs[p * k..(p + 1) * k].to_vec();
            let mean = folds.iter().sum::<f64>() / k as f64;
            CvRow { point, folds, mean }
        })
        .collect();
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.mean > rows[best].mean {
            best = i;
        }
    }
    Ok(GridResult {
        best: rows[best].point,
        fits: jobs.len(),
        rows,
        notices,
    })
}

/// Test AUC against propagation depth, with the same splits at every depth.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DepthSweep {
    pub dataset: String,
    pub method: Method,
    pub depths: Vec<usize>,
    /// `per_run[d][r]`: AUC at `depths[d]` in run `r`.
    pub per_run: Vec<Vec<f64>>,
    pub summaries: Vec<Summary>,
    pub seeds: Vec<u64>,
    pub notices: Vec<String>,
}

impl DepthSweep {
    pub fn write_csv<W: Write + ?Sized>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "layers,mean_auc,std")?;
        for (d, s) in self.depths.iter().zip(&self.summaries) {
            writeln!(w, "{},{},{}", d, s.mean, s.std)?;
        }
        Ok(())
    }

    pub fn mean_at(&self, depth: usize) -> Option<f64> {
        self.depths.iter().position(|&d| d == depth).map(|i| self.summaries[i].mean)
    }
}

/// Sweeps an untrained method over `depths`. Duplicates are removed and
/// depths are reported in ascending order; each run propagates once up to
/// the largest depth and scores along the way.
pub fn depth_sweep(ds: &Dataset, cfg: &ExperimentConfig, depths: &[usize]) -> Result<DepthSweep> {
    cfg.validate()?;
    let Method::Untrained(variant) = cfg.method else {
        return Err(Error::InvalidParameter(format!(
            "depth sweep needs an untrained method, got {}",
            cfg.method
        )));
    };
    if depths.is_empty() {
        return Err(Error::InvalidParameter("empty depth list".into()));
    }
    let mut sorted = depths.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut notices = Vec::new();
    if sorted.len() < depths.len() {
        notices.push(format!(
            "removed {} duplicate depth(s); sweeping {:?}",
            depths.len() - sorted.len(),
            sorted
        ));
    }
    let seeds: Vec<u64> = (0..cfg.runs as u64).map(|r| derive_seed(cfg.seed, r)).collect();
    let by_run = seeds
        .par_iter()
        .enumerate()
        .map(|(run, &seed)| match cfg.precision {
            Precision::F64 => sweep_run::<f64>(ds, cfg, variant, &sorted, seed),
            Precision::F32 => sweep_run::<f32>(ds, cfg, variant, &sorted, seed),
        }
        .map_err(|e| Error::Run { run, source: Box::new(e) }))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let per_run: Vec<Vec<f64>> = (0..sorted.len())
        .map(|d| by_run.iter().map(|r| r[d]).collect())
        .collect();
    let summaries = per_run.iter().map(|xs| summarize(xs)).collect();
    Ok(DepthSweep {
        dataset: ds.name.clone(),
        method: cfg.method,
        depths: sorted,
        per_run,
        summaries,
        seeds,
        notices,
    })
}

fn sweep_run<T: Scalar>(ds: &Dataset, cfg: &ExperimentConfig, variant: Variant, depths: &[usize], seed: u64) -> Result<Vec<f64>> {
    let (split, g_train) = split_edges(&ds.graph, cfg.test_frac, cfg.val_frac, seed)?;
    if split.test_pos.is_empty() {
        return Err(Error::InvalidParameter("test set is empty".into()));
    }
    let g_prop = if cfg.leak_full_graph { &ds.graph } else { &g_train };
    let op = PropagationOperator::<T>::build(g_prop, variant, cfg.epsilon);
    let pos = as_pairs(&split.test_pos);
    let neg = as_pairs(&split.test_neg);
    let mut h = ds.initial_features(cfg, derive_seed(seed, 3))?.cast::<T>();
    let mut out = Vec::with_capacity(depths.len());
    let mut layer = 0;
    for &d in depths {
        while layer < d {
            h = op.apply(&h)?;
            layer += 1;
        }
        out.push(roc_auc(&inner_product_scores(&h, &pos)?, &inner_product_scores(&h, &neg)?)?);
    }
    Ok(out)
}
