use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_archgraph");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Small two-task benchmark plus a config with short training.
fn gen_bench(dir: &Path) -> (PathBuf, PathBuf) {
    let bench = dir.join("bench.jsonl");
    ok(
        dir,
        &[
            "gen-synth",
            "--n",
            "256",
            "--nodes",
            "4",
            "--tasks",
            "source:max:1,target-a:min:0.8",
            "--seed",
            "5",
            "--out",
            bench.to_str().unwrap(),
        ],
    );
    let config = dir.join("fast.toml");
    fs::write(&config, "top_k = 60\n\n[train]\nepochs = 8\nfinetune_epochs = 4\n").unwrap();
    (bench, config)
}

#[test]
fn gen_synth_writes_header_rows_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (bench, _) = gen_bench(dir.path());
    let text = fs::read_to_string(&bench).unwrap();
    assert_eq!(text.lines().count(), 257);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bench.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"][0]["path"].as_str().map(|p| p.ends_with("bench.jsonl")), Some(true));
}

#[test]
fn mwas_on_the_triangle() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("tri.txt");
    fs::write(&graph, "0 1 0.9\n1 2 0.8\n2 0 0.1\n").unwrap();
    let out = ok(dir.path(), &["mwas", graph.to_str().unwrap(), "--eps", "0.5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let summary: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert!((summary["score"].as_f64().unwrap() - 1.7).abs() < 1e-9);
    assert!((summary["drop_ratio"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-9);
    assert_eq!(text.lines().filter(|l| !l.starts_with('{') && !l.starts_with('#')).count(), 2);
}

#[test]
fn experiment_rows_and_byte_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let (bench, config) = gen_bench(dir.path());
    let args = |out: &str| {
        vec![
            "experiment".to_string(),
            "--bench".into(),
            bench.to_str().unwrap().into(),
            "--config".into(),
            config.to_str().unwrap().into(),
            "--methods".into(),
            "arch-graph,random-search".into(),
            "--seeds".into(),
            "1..20".into(),
            "--out".into(),
            dir.path().join(out).to_str().unwrap().into(),
        ]
    };
    let first: Vec<String> = args("a.csv");
    ok(dir.path(), &first.iter().map(String::as_str).collect::<Vec<_>>());
    let mut second = args("b.csv");
    second.extend(["--jobs".into(), "2".into()]);
    ok(dir.path(), &second.iter().map(String::as_str).collect::<Vec<_>>());

    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let text = String::from_utf8(a.clone()).unwrap();
    let (methods, targets, seeds) = (2, 1, 20);
    assert_eq!(text.lines().count(), 1 + methods * targets * seeds);
    assert_eq!(text.lines().next(), Some("method,task,metric,value,seed"));
    assert_eq!(a, fs::read(dir.path().join("b.csv")).unwrap());
    for side in ["summary.csv", "details.csv"] {
        assert_eq!(
            fs::read(dir.path().join(format!("a.{side}"))).unwrap(),
            fs::read(dir.path().join(format!("b.{side}"))).unwrap(),
            "{side}"
        );
    }
    assert!(dir.path().join("a.manifest.json").exists());
}

#[test]
fn metrics_from_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("xy.csv");
    fs::write(&csv, "x,y\n1,2\n2,4\n3,9\n4,16\n").unwrap();
    let out = ok(dir.path(), &["metrics", "--csv", csv.to_str().unwrap(), "--x", "x", "--y", "y"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n"], 4);
    assert_eq!(v["kendall_tau"], 1.0);
    assert!((v["spearman"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(v["pearson"].as_f64().unwrap() < 1.0);
}

#[test]
fn exit_codes_separate_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = run(dir.path(), &["search", "--bench", "nope.jsonl"]);
    assert_eq!(missing.status.code(), Some(3));

    let bad_method = run(dir.path(), &["experiment", "--methods", "simulated-annealing"]);
    assert_eq!(bad_method.status.code(), Some(2));

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "unknown_key = 1\n").unwrap();
    let unknown = run(dir.path(), &["search", "--bench", "nope.jsonl", "--config", cfg.to_str().unwrap()]);
    assert_eq!(unknown.status.code(), Some(2));

    fs::write(&cfg, "m = 1\n").unwrap();
    let (bench, _) = gen_bench(dir.path());
    let invalid = run(dir.path(), &["search", "--bench", bench.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(invalid.status.code(), Some(2));

    let garbage = dir.path().join("garbage.jsonl");
    fs::write(&garbage, "not json\n").unwrap();
    let corrupt = run(dir.path(), &["search", "--bench", garbage.to_str().unwrap()]);
    assert_eq!(corrupt.status.code(), Some(3));
}
