use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn wsd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsd")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = wsd(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Toy workspace with a generated config; returns the config path.
fn toy(dir: &Path) -> PathBuf {
    let root = dir.join("toy");
    ok(&["generate-toy", "--out", root.to_str().unwrap(), "--seed", "2"]);
    root.join("config.toml")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn help_exits_zero_everywhere() {
    ok(&["--help"]);
    for cmd in [
        "build-datasets",
        "train",
        "predict",
        "evaluate",
        "split-analysis",
        "mfs-baseline",
        "generate-toy",
    ] {
        ok(&[cmd, "--help"]);
    }
}

#[test]
fn missing_lexicon_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[paths]\nlexicon = \"nowhere\"\nout = \"run\"\n").unwrap();
    let out = wsd(&["build-datasets", "-c", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lexicon directory"));

    fs::write(&cfg, "bogus = 1\n[paths]\nlexicon = \".\"\nout = \"run\"\n").unwrap();
    assert_eq!(wsd(&["train", "-c", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn empty_training_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy(dir.path());
    ok(&["build-datasets", "-c", s(&cfg)]);
    fs::write(dir.path().join("toy/run/datasets/context_gloss.tsv"), "").unwrap();
    let out = wsd(&["train", "-c", s(&cfg), "--preset", "contrastive-only"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn oversampling_repeats_only_positives() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy(dir.path());
    let file = dir.path().join("toy/run/datasets/context_gloss.tsv");
    ok(&["build-datasets", "-c", s(&cfg), "--oversample", "1", "--no-gloss-gloss"]);
    let once = rows(&file);
    ok(&["build-datasets", "-c", s(&cfg), "--no-gloss-gloss"]);
    let thrice = rows(&file);
    let positives = once.iter().filter(|r| r.split('\t').nth(1) == Some("1")).count();
    assert!(positives > 0);
    assert_eq!(thrice.len(), once.len() + 2 * positives);
    assert!(once.iter().all(|r| r.starts_with("context_gloss\t")));
}

#[test]
fn pipeline_round_trip_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy(dir.path());
    let run = dir.path().join("toy/run");
    ok(&["build-datasets", "-c", s(&cfg)]);
    let first = fs::read(run.join("datasets/triplets.tsv")).unwrap();
    ok(&["build-datasets", "-c", s(&cfg)]);
    assert_eq!(fs::read(run.join("datasets/triplets.tsv")).unwrap(), first);

    ok(&[
        "train",
        "-c",
        s(&cfg),
        "--preset",
        "hypernym_then_triplet",
        "--epochs",
        "2",
    ]);
    let ckpts: Vec<_> = fs::read_dir(run.join("checkpoints")).unwrap().collect();
    assert_eq!(ckpts.len(), 2);
    let report = fs::read(run.join("train_report.json")).unwrap();
    let model = fs::read(run.join("model.ckpt")).unwrap();
    ok(&[
        "train",
        "-c",
        s(&cfg),
        "--preset",
        "hypernym_then_triplet",
        "--epochs",
        "2",
    ]);
    assert_eq!(fs::read(run.join("train_report.json")).unwrap(), report);
    assert_eq!(fs::read(run.join("model.ckpt")).unwrap(), model);

    ok(&["predict", "-c", s(&cfg)]);
    let keys = run.join("predictions/toy_test.key.txt");
    assert!(!rows(&keys).is_empty());
    let from_files = ok(&["evaluate", "-c", s(&cfg), "--predictions", s(&run.join("predictions"))]).stdout;
    let direct = ok(&["evaluate", "-c", s(&cfg)]).stdout;
    assert_eq!(from_files, direct);
    let report: serde_json::Value = serde_json::from_slice(&direct).unwrap();
    for field in ["precision", "recall", "f1"] {
        assert!(report["all"][field].is_f64(), "{field}");
    }
    // Dev counts toward the overall score unless excluded.
    assert_eq!(report["datasets"][1][0], "toy_dev");
    assert_eq!(report["all"]["total"], 300);
    let no_dev = ok(&["evaluate", "-c", s(&cfg), "--exclude-dev"]).stdout;
    let no_dev: serde_json::Value = serde_json::from_slice(&no_dev).unwrap();
    assert_eq!(no_dev["all"], report["datasets"][0][1]);

    // One corpus to standard output, through a persisted index.
    let index = dir.path().join("gloss.idx");
    let xml = dir.path().join("toy/toy_test.data.xml");
    let args = ["predict", "-c", s(&cfg), "--corpus", s(&xml), "--index", s(&index)];
    let a = ok(&args).stdout;
    assert!(index.is_file());
    let b = ok(&args).stdout;
    assert_eq!(a, b);
    assert_eq!(a, fs::read(&keys).unwrap());
}

#[test]
fn split_without_training_data_is_all_unseen() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy(dir.path());
    ok(&["build-datasets", "-c", s(&cfg)]);
    ok(&["train", "-c", s(&cfg), "--epochs", "1"]);
    let text = fs::read_to_string(&cfg).unwrap();
    let no_train: String = text
        .lines()
        .map(|l| if l.starts_with("train = ") { "train = []" } else { l })
        .collect::<Vec<_>>()
        .join("\n");
    let cfg2 = dir.path().join("toy/no_train.toml");
    fs::write(&cfg2, no_train).unwrap();
    let out = ok(&["split-analysis", "-c", s(&cfg2)]).stdout;
    let r: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(r["unseen"]["f1"], r["overall"]["f1"]);
    assert_eq!(r["seen"]["total"], 0);
}

#[test]
fn mfs_baseline_writes_keys_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy(dir.path());
    let out = ok(&["--threads", "2", "mfs-baseline", "-c", s(&cfg)]).stdout;
    let r: serde_json::Value = serde_json::from_slice(&out).unwrap();
    let f1 = r["all"]["f1"].as_f64().unwrap();
    assert!(f1 > 30.0 && f1 < 90.0, "{f1}");
    assert!(dir.path().join("toy/run/mfs/toy_test.key.txt").is_file());
}
