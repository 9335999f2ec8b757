use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use utmp::experiment::{depth_sweep, grid_search, run_experiment, score_untrained, Dataset, ExperimentConfig, FeatureInit, Precision};
use utmp::features::{orthogonality_report, FeatureMatrix, PairMeasure, RandomKind, RowNorm};
use utmp::io::{read_graph, read_pairs, write_atomic};
use utmp::propagation::{PropagationOperator, Variant};
use utmp::verify::{run_suite, VerifyConfig};
use utmp::{Error, Graph, Scalar};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_VERIFY: u8 = 3;

/// Untrained message passing for link prediction.
#[derive(Parser, Debug)]
#[command(name = "utmp", version, about)]
struct Cli {
    /// Worker threads for runs, grid points and graphs
    #[arg(long, global = true, env = "UTMP_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print size, degree statistics and structural checks of an edge list
    Info(InfoArgs),
    /// Write propagated features S^l H0 in feature-file format
    Propagate(PropagateArgs),
    /// Score node pairs with an untrained method or a heuristic
    Score(ScoreArgs),
    /// Check the propagation identities on random graphs
    Verify(VerifyArgs),
    /// Histogram of feature similarity over connected and random pairs
    Ortho(OrthoArgs),
    /// Multi-run test ROC-AUC of one configuration
    Eval(EvalArgs),
    /// Cross-validated grid search
    Sweep(SweepArgs),
    /// Test ROC-AUC of an untrained method against depth
    DepthSweep(DepthArgs),
}

#[derive(Args, Debug)]
struct InfoArgs {
    graph: PathBuf,
    /// Also check a feature file against the graph
    #[arg(long)]
    features: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct FeatureArgs {
    /// Feature file; one-hot or random features are used otherwise
    #[arg(long)]
    features: Option<PathBuf>,
    /// onehot, gaussian or sparse
    #[arg(long, default_value = "onehot")]
    init: String,
    /// Columns of random features
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Density of sparse binary features
    #[arg(long, default_value_t = 0.1)]
    density: f64,
    /// l1, l2 or none
    #[arg(long, default_value = "l1")]
    normalization: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct PropagateArgs {
    graph: PathBuf,
    #[arg(long, default_value = "utgcn")]
    variant: String,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// f64 or f32 storage
    #[arg(long, default_value = "f64")]
    precision: String,
    #[command(flatten)]
    feat: FeatureArgs,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    graph: PathBuf,
    /// utgcn, utsage, utgin, cn, td, tn, aa, ra, katz, rpr or simrank
    #[arg(long)]
    method: String,
    /// Pair list, one "u v" per line
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Use d instead of d+1 in Adamic-Adar and resource allocation
    #[arg(long)]
    classical_degree: bool,
    #[arg(long, default_value = "f64")]
    precision: String,
    #[command(flatten)]
    feat: FeatureArgs,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    graphs: usize,
    #[arg(long, default_value_t = 5)]
    min_n: usize,
    #[arg(long, default_value_t = 30)]
    max_n: usize,
    /// Edge probability
    #[arg(long, default_value_t = 0.2)]
    p: f64,
    /// Largest depth; every depth from 1 is checked
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Perturb one operator weight per graph; the suite must then fail
    #[arg(long)]
    perturb: bool,
    /// Per-check summary CSV
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Failure listing CSV
    #[arg(long)]
    failures: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OrthoArgs {
    graph: PathBuf,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Cosine similarity instead of the raw inner product
    #[arg(long)]
    cosine: bool,
    #[command(flatten)]
    feat: FeatureArgs,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Flags mirroring experiment config keys; they override `--config`.
#[derive(Args, Debug, Default)]
struct ExpArgs {
    /// Flat key=value experiment file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    density: Option<String>,
    #[arg(long)]
    normalization: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    runs: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    test_frac: Option<String>,
    #[arg(long)]
    val_frac: Option<String>,
    /// Propagate over the full graph, held-out edges included
    #[arg(long)]
    leak_full_graph: bool,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    max_epochs: Option<String>,
    #[arg(long)]
    patience: Option<String>,
    /// Add a bias to the linear head
    #[arg(long)]
    bias: bool,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    max_len: Option<String>,
    #[arg(long)]
    classical_degree: bool,
    #[arg(long)]
    precision: Option<String>,
    #[arg(long)]
    folds: Option<String>,
    #[arg(long)]
    grid_layers: Option<String>,
    #[arg(long)]
    grid_lr: Option<String>,
    #[arg(long)]
    grid_hidden: Option<String>,
    #[arg(long)]
    depths: Option<String>,
}

impl ExpArgs {
    fn resolve(&self) -> utmp::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let pairs = [
            ("dataset", &self.dataset),
            ("features", &self.features),
            ("init", &self.init),
            ("dim", &self.dim),
            ("density", &self.density),
            ("normalization", &self.normalization),
            ("method", &self.method),
            ("layers", &self.layers),
            ("epsilon", &self.epsilon),
            ("runs", &self.runs),
            ("seed", &self.seed),
            ("test_frac", &self.test_frac),
            ("val_frac", &self.val_frac),
            ("hidden", &self.hidden),
            ("lr", &self.lr),
            ("max_epochs", &self.max_epochs),
            ("patience", &self.patience),
            ("gamma", &self.gamma),
            ("max_len", &self.max_len),
            ("precision", &self.precision),
            ("folds", &self.folds),
            ("grid_layers", &self.grid_layers),
            ("grid_lr", &self.grid_lr),
            ("grid_hidden", &self.grid_hidden),
            ("depths", &self.depths),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for (key, on) in [
            ("leak_full_graph", self.leak_full_graph),
            ("bias", self.bias),
            ("classical_degree", self.classical_degree),
        ] {
            if on {
                cfg.set(key, "true")?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    exp: ExpArgs,
    /// Per-run results CSV
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExpArgs,
    /// Cross-validation table CSV
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Evaluate the selected configuration and write its per-run CSV here
    #[arg(long)]
    eval_best: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DepthArgs {
    #[command(flatten)]
    exp: ExpArgs,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Data(e.to_string())
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match cli.command {
        Command::Info(a) => info(a),
        Command::Propagate(a) => propagate(a),
        Command::Score(a) => score(a),
        Command::Verify(a) => verify(a),
        Command::Ortho(a) => ortho(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::DepthSweep(a) => depth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Verify(m)) => {
            eprintln!("{m}");
            ExitCode::from(EXIT_VERIFY)
        }
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, Failure> {
    s.parse().map_err(Failure::from)
}

/// Writes to `out` atomically, or to stdout.
fn emit<F>(out: Option<&Path>, body: F) -> utmp::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match out {
        Some(p) => write_atomic(p, body),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

/// Appends one JSON record to `<out>.meta.jsonl`.
/// Summary lines go to stderr when stdout already carries the CSV.
fn report(out: Option<&Path>, line: &str) {
    if out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn append_meta(out: Option<&Path>, record: serde_json::Value) -> utmp::Result<()> {
    let Some(out) = out else { return Ok(()) };
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.jsonl");
    let meta = PathBuf::from(name);
    let mut text = fs::read_to_string(&meta).unwrap_or_default();
    text.push_str(&record.to_string());
    text.push('\n');
    write_atomic(&meta, |w| w.write_all(text.as_bytes()))
}

fn meta(command: &str, body: serde_json::Value) -> serde_json::Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "record": body,
    })
}

fn load_graph(path: &Path) -> Result<Graph, Failure> {
    let (g, report) = read_graph(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    if report.duplicate_edges + report.self_loops > 0 {
        eprintln!(
            "note: dropped {} duplicate edge(s) and {} self-loop(s)",
            report.duplicate_edges, report.self_loops
        );
    }
    Ok(g)
}

fn build_features(g: &Graph, a: &FeatureArgs) -> Result<FeatureMatrix<f64>, Failure> {
    let norm: RowNorm = parse(&a.normalization)?;
    let raw = match &a.features {
        Some(p) => {
            let file = fs::File::open(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
            FeatureMatrix::read(io::BufReader::new(file), g)?
        }
        None => match parse::<FeatureInit>(&a.init)? {
            FeatureInit::OneHot => FeatureMatrix::one_hot(g.node_count()),
            FeatureInit::Gaussian => FeatureMatrix::random(g.node_count(), a.dim, RandomKind::Gaussian, a.seed)?,
            FeatureInit::SparseBinary => FeatureMatrix::random(
                g.node_count(),
                a.dim,
                RandomKind::SparseBinary { density: a.density },
                a.seed,
            )?,
        },
    };
    Ok(raw.normalize_rows(norm))
}

fn info(a: InfoArgs) -> CmdResult {
    let g = load_graph(&a.graph)?;
    let n = g.node_count();
    let degrees: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let max = degrees.iter().copied().max().unwrap_or(0);
    let min = degrees.iter().copied().min().unwrap_or(0);
    let mean = if n == 0 { 0.0 } else { 2.0 * g.edge_count() as f64 / n as f64 };
    let isolated = degrees.iter().filter(|&&d| d == 0).count();
    println!("nodes: {n}");
    println!("edges: {}", g.edge_count());
    println!("degree: min={min} max={max} mean={mean:.4}");
    println!("isolated: {isolated}");
    let diag = g.validate();
    println!("checks: {}", if diag.is_ok() { "ok".to_string() } else { diag.to_string() });
    if let Some(p) = &a.features {
        let file = fs::File::open(p).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?;
        let f = FeatureMatrix::<f64>::read(io::BufReader::new(file), &g)?;
        println!("features: {} x {}", f.rows(), f.cols());
    }
    Ok(())
}

fn propagate_as<T: Scalar>(g: &Graph, v: Variant, eps: f64, h0: &FeatureMatrix<f64>, l: usize, out: Option<&Path>) -> CmdResult {
    let op = PropagationOperator::<T>::build(g, v, eps);
    let h = op.propagate(&h0.cast::<T>(), l)?;
    emit(out, |w| h.write(g, w))?;
    Ok(())
}

fn propagate(a: PropagateArgs) -> CmdResult {
    let g = load_graph(&a.graph)?;
    let variant: Variant = parse(&a.variant)?;
    let h0 = build_features(&g, &a.feat)?;
    let start = Instant::now();
    match parse::<Precision>(&a.precision)? {
        Precision::F64 => propagate_as::<f64>(&g, variant, a.epsilon, &h0, a.layers, a.out.as_deref())?,
        Precision::F32 => propagate_as::<f32>(&g, variant, a.epsilon, &h0, a.layers, a.out.as_deref())?,
    }
    eprintln!("propagated {} layer(s) in {:.3}s", a.layers, start.elapsed().as_secs_f64());
    append_meta(
        a.out.as_deref(),
        meta(
            "propagate",
            json!({
                "graph": a.graph,
                "variant": variant.name(),
                "layers": a.layers,
                "epsilon": a.epsilon,
                "precision": a.precision,
                "features": a.feat.features,
                "init": a.feat.init,
                "dim": a.feat.dim,
                "normalization": a.feat.normalization,
                "seed": a.feat.seed,
            }),
        ),
    )?;
    Ok(())
}

fn score(a: ScoreArgs) -> CmdResult {
    let g = load_graph(&a.graph)?;
    let mut cfg = ExperimentConfig::default();
    cfg.set("method", &a.method)?;
    cfg.layers = a.layers;
    cfg.epsilon = a.epsilon;
    cfg.gamma = a.gamma;
    cfg.max_len = a.max_len;
    cfg.classical_degree = a.classical_degree;
    cfg.set("precision", &a.precision)?;
    cfg.validate()?;
    let file = fs::File::open(&a.pairs).map_err(|e| Failure::Data(format!("{}: {e}", a.pairs.display())))?;
    let pairs = read_pairs(io::BufReader::new(file), &g)?;
    let h0 = match cfg.method.variant() {
        Some(_) => build_features(&g, &a.feat)?,
        None => FeatureMatrix::zeros(g.node_count(), 0),
    };
    let scores = score_untrained(cfg.method, &g, &h0, &cfg, &pairs)?;
    emit(a.out.as_deref(), |w| {
        for ((u, v), s) in pairs.iter().zip(&scores) {
            writeln!(w, "{} {} {}", g.label(*u), g.label(*v), s)?;
        }
        Ok(())
    })?;
    append_meta(
        a.out.as_deref(),
        meta("score", json!({ "graph": a.graph, "pairs": a.pairs, "config": cfg })),
    )?;
    Ok(())
}

fn verify(a: VerifyArgs) -> CmdResult {
    if a.layers == 0 {
        return Err(Failure::Usage("--layers must be >= 1".into()));
    }
    let cfg = VerifyConfig {
        graphs: a.graphs,
        min_n: a.min_n,
        max_n: a.max_n,
        edge_prob: a.p,
        layers: (1..=a.layers).collect(),
        seed: a.seed,
        tolerance: a.tolerance,
        perturb: a.perturb,
        ..Default::default()
    };
    let start = Instant::now();
    let report = run_suite(&cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    match &a.out {
        Some(p) => write_atomic(p, |w| report.write_summary_csv(w))?,
        None => {
            for t in &report.tallies {
                println!("{:<28} compared={:<8} failed={}", t.check, t.compared, t.failed);
            }
        }
    }
    if let Some(p) = &a.failures {
        write_atomic(p, |w| report.write_failures_csv(w))?;
    }
    append_meta(
        a.out.as_deref(),
        meta(
            "verify",
            json!({ "config": cfg, "compared": report.compared(), "failed": report.failures.len() }),
        ),
    )?;
    eprintln!(
        "{} graphs, {} comparisons, {} failures in {elapsed:.2}s",
        report.graphs,
        report.compared(),
        report.failures.len()
    );
    if report.passed() {
        return Ok(());
    }
    let mut msg = String::from("verification failed:");
    for f in &report.failures {
        msg.push_str(&format!(
            "\n  {} graph={} seed={} n={} l={} ({}, {}): expected {} got {} (breach {:e} > tol {:e})",
            f.check, f.graph, f.graph_seed, f.n, f.layers, f.u, f.v, f.expected, f.actual, f.breach, f.tolerance
        ));
    }
    Err(Failure::Verify(msg))
}

fn ortho(a: OrthoArgs) -> CmdResult {
    let g = load_graph(&a.graph)?;
    let f = build_features(&g, &a.feat)?;
    let measure = if a.cosine { PairMeasure::Cosine } else { PairMeasure::Inner };
    let report = orthogonality_report(&g, &f, a.samples, a.feat.seed, measure)?;
    if report.no_edges {
        eprintln!("note: graph has no edges; connected-pair sample is empty");
    }
    emit(a.out.as_deref(), |w| report.write_histogram_csv(a.bins, w))?;
    eprintln!(
        "mean connected={:.6} mean random={:.6} mean |random|={:.6}",
        report.mean_connected(),
        report.mean_random(),
        report.mean_abs_random()
    );
    append_meta(
        a.out.as_deref(),
        meta(
            "ortho",
            json!({
                "graph": a.graph,
                "samples": a.samples,
                "bins": a.bins,
                "cosine": a.cosine,
                "features": a.feat.features,
                "init": a.feat.init,
                "dim": a.feat.dim,
                "seed": a.feat.seed,
                "mean_connected": report.mean_connected(),
                "mean_random": report.mean_random(),
            }),
        ),
    )?;
    Ok(())
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset, Failure> {
    Dataset::load(cfg).map_err(|e| match e {
        Error::Config(_) => Failure::Usage(e.to_string()),
        other => Failure::Data(other.to_string()),
    })
}

fn eval(a: EvalArgs) -> CmdResult {
    let cfg = a.exp.resolve()?;
    let ds = load_dataset(&cfg)?;
    let start = Instant::now();
    let res = run_experiment(&ds, &cfg)?;
    emit(a.out.as_deref(), |w| res.write_csv(w))?;
    report(a.out.as_deref(), &res.summary_line());
    eprintln!("{} run(s) in {:.2}s", cfg.runs, start.elapsed().as_secs_f64());
    append_meta(
        a.out.as_deref(),
        meta("eval", json!({ "config": cfg, "seeds": res.seeds, "fingerprint": res.fingerprint, "summary": res.summary() })),
    )?;
    Ok(())
}

fn sweep(a: SweepArgs) -> CmdResult {
    let cfg = a.exp.resolve()?;
    let ds = load_dataset(&cfg)?;
    let start = Instant::now();
    let grid = grid_search(&ds, &cfg)?;
    for n in &grid.notices {
        eprintln!("note: {n}");
    }
    emit(a.out.as_deref(), |w| grid.write_csv(w))?;
    let best = grid.best;
    let line = format!(
        "best: layers={} lr={} hidden={} ({} fits)",
        best.layers,
        best.lr.map_or("-".into(), |x| x.to_string()),
        best.hidden.map_or("-".into(), |x| x.to_string()),
        grid.fits
    );
    report(a.out.as_deref(), &line);
    append_meta(
        a.out.as_deref(),
        meta("sweep", json!({ "config": cfg, "best": best, "fits": grid.fits, "notices": grid.notices })),
    )?;
    if let Some(path) = &a.eval_best {
        let mut chosen = cfg.clone();
        chosen.layers = best.layers;
        if let Some(lr) = best.lr {
            chosen.lr = lr;
        }
        if let Some(h) = best.hidden {
            chosen.hidden = h;
        }
        let res = run_experiment(&ds, &chosen)?;
        write_atomic(path, |w| res.write_csv(w))?;
        report(a.out.as_deref(), &res.summary_line());
        append_meta(
            Some(path),
            meta("eval", json!({ "config": chosen, "seeds": res.seeds, "fingerprint": res.fingerprint, "summary": res.summary() })),
        )?;
    }
    eprintln!("finished in {:.2}s", start.elapsed().as_secs_f64());
    Ok(())
}

fn depth(a: DepthArgs) -> CmdResult {
    let cfg = a.exp.resolve()?;
    let ds = load_dataset(&cfg)?;
    let sweep = depth_sweep(&ds, &cfg, &cfg.depths)?;
    for n in &sweep.notices {
        eprintln!("note: {n}");
    }
    emit(a.out.as_deref(), |w| sweep.write_csv(w))?;
    append_meta(
        a.out.as_deref(),
        meta("depth-sweep", json!({ "config": cfg, "depths": sweep.depths, "seeds": sweep.seeds })),
    )?;
    Ok(())
}
