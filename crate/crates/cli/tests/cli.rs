use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn utmp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_utmp"))
        .args(args)
        .env_remove("UTMP_JOBS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Ring of 60 nodes with chords to the nodes three and seven steps ahead.
fn write_graph(dir: &Path) -> String {
    let mut text = String::new();
    for i in 0..60 {
        for step in [1, 3, 7] {
            text.push_str(&format!("{} {}\n", i, (i + step) % 60));
        }
    }
    let path = dir.join("ring.edges");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn write_triangle_with_tail(dir: &Path) -> String {
    let path = dir.join("tri.edges");
    fs::write(&path, "0 1\n1 2\n2 0\n2 3\n").unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn info_reports_counts() {
    let dir = TempDir::new().unwrap();
    let out = utmp(&["info", &write_triangle_with_tail(dir.path())]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("nodes: 4"));
    assert!(text.contains("edges: 4"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&utmp(&["frobnicate"])), 1);
    assert_eq!(code(&utmp(&["eval", "--runs", "3"])), 1);
    assert_eq!(code(&utmp(&["--help"])), 0);
}

#[test]
fn missing_input_exits_two() {
    let out = utmp(&["info", "/nonexistent/graph.edges"]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());
}

#[test]
fn verify_passes_and_perturbation_fails() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("verify.csv");
    let ok = utmp(&["verify", "--graphs", "10", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let summary = fs::read_to_string(&csv).unwrap();
    assert!(summary.starts_with("check,compared,failed\n"));
    assert!(summary.lines().skip(1).all(|l| l.ends_with(",0")));

    let bad = utmp(&["verify", "--graphs", "10", "--perturb"]);
    assert_eq!(code(&bad), 3);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("seed"));
}

#[test]
fn propagate_writes_one_row_per_node() {
    let dir = TempDir::new().unwrap();
    let out = utmp(&["propagate", &write_triangle_with_tail(dir.path()), "--layers", "1"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(|l| l.split_whitespace().skip(1).map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.len() == 4));
    assert!((rows[2][2] - 0.25).abs() < 1e-15);
    assert!((rows[0][2] - 1.0 / 12f64.sqrt()).abs() < 1e-15);
}

#[test]
fn score_emits_pair_scores() {
    let dir = TempDir::new().unwrap();
    let graph = write_triangle_with_tail(dir.path());
    let pairs = dir.path().join("pairs.txt");
    fs::write(&pairs, "0 3\n1 2\n").unwrap();
    let out = utmp(&["score", &graph, "--method", "utgin", "--layers", "1", "--pairs", pairs.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "0 3 1\n1 2 3\n");

    fs::write(&pairs, "0 9\n").unwrap();
    let out = utmp(&["score", &graph, "--method", "cn", "--pairs", pairs.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn eval_is_byte_identical_across_runs_and_jobs() {
    let dir = TempDir::new().unwrap();
    let graph = write_graph(dir.path());
    let run = |name: &str, jobs: &str| {
        let path = dir.path().join(name);
        let out = utmp(&[
            "--jobs", jobs, "eval", "--dataset", &graph, "--method", "ssage", "--runs", "3", "--max-epochs", "20",
            "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        (fs::read(&path).unwrap(), path)
    };
    let (a, path) = run("a.csv", "1");
    let (b, _) = run("b.csv", "1");
    let (c, _) = run("c.csv", "2");
    assert_eq!(a, b);
    assert_eq!(a, c);

    let text = String::from_utf8(a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "dataset,method,layers,hidden,lr,run,seed,auc");
    assert_eq!(lines.len(), 1 + 3 + 2);
    assert_eq!(lines[4], "mean,std,std_sample");

    let meta = fs::read_to_string(format!("{}.meta.jsonl", path.display())).unwrap();
    let record: serde_json::Value = serde_json::from_str(meta.lines().next().unwrap()).unwrap();
    assert_eq!(record["command"], "eval");
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let graph = write_graph(dir.path());
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, format!("# untrained baseline\ndataset = {graph}\nmethod = utgin\nruns = 2\n")).unwrap();
    let out = utmp(&["eval", "--config", cfg.to_str().unwrap(), "--method", "utgcn"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.lines().skip(1).take(2).all(|l| l.contains(",utgcn,")));
    assert_eq!(text.lines().count(), 1 + 2 + 2);

    fs::write(&cfg, "runs = lots\n").unwrap();
    assert_eq!(code(&utmp(&["eval", "--config", cfg.to_str().unwrap()])), 1);
}

#[test]
fn depth_sweep_rejects_trained_methods() {
    let dir = TempDir::new().unwrap();
    let graph = write_graph(dir.path());
    let out = utmp(&["depth-sweep", "--dataset", &graph, "--method", "sgcn"]);
    assert_eq!(code(&out), 1);

    let out = utmp(&["depth-sweep", "--dataset", &graph, "--method", "utgcn", "--runs", "2", "--depths", "1,2,3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("layers,mean_auc,std"));
    assert_eq!(text.lines().count(), 4);
}
