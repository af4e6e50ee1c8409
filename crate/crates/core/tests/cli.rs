use std::path::Path;

use flick::cli;
use flick::report;
use flick::synth::FixturePaths;

fn synth(dir: &Path) -> FixturePaths {
    let code = cli::run([
        "flick", "synth", "--out", dir.to_str().unwrap(), "--n-unlabeled", "400", "--n-labeled", "60",
        "--n-heldout", "90", "--dim", "8", "--noise-fraction", "0.2", "--seed", "2",
    ]);
    assert_eq!(code, 0);
    FixturePaths::in_dir(dir)
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

const SMALL: [&str; 8] = ["--set", "k_clusters=6", "--set", "k_top=4", "--set", "hidden_size=16", "--set", "few_label.count=30"];

fn run_args(fx: &FixturePaths, out: &Path, mode: &str) -> Vec<String> {
    let mut v: Vec<String> = vec![
        "flick".into(), "run".into(),
        "--unlabeled".into(), s(&fx.unlabeled),
        "--labeled".into(), s(&fx.labeled),
        "--labels".into(), s(&fx.labeled_labels),
        "--heldout".into(), s(&fx.heldout),
        "--heldout-labels".into(), s(&fx.heldout_labels),
        "--out".into(), s(out),
        "--mode".into(), mode.into(),
        "--profile".into(), "proxy".into(),
    ];
    v.extend(SMALL.iter().map(|a| a.to_string()));
    v
}

#[test]
fn run_writes_reports_per_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = synth(&tmp.path().join("fx"));

    let flick_out = tmp.path().join("flick");
    assert_eq!(cli::run(run_args(&fx, &flick_out, "flick")), 0);
    for f in [report::CLUSTER_REPORT_FILE, report::CLUSTER_MODEL_FILE, report::METRICS_FILE, report::CLSFT_INIT_FILE, report::RUN_FILE] {
        assert!(flick_out.join(f).exists(), "missing {f}");
    }
    let cfg: serde_json::Value = report::read_json(flick_out.join(report::CONFIG_FILE)).unwrap();
    assert_eq!(cfg["k_clusters"], 6);
    assert_eq!(cfg["profile"], "proxy");

    let base_out = tmp.path().join("baseline");
    assert_eq!(cli::run(run_args(&fx, &base_out, "baseline")), 0);
    assert!(base_out.join(report::METRICS_FILE).exists());
    assert!(!base_out.join(report::CLUSTER_REPORT_FILE).exists());
    assert!(!base_out.join(report::CLUSTER_MODEL_FILE).exists());
}

#[test]
fn staged_commands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = synth(&tmp.path().join("fx"));
    let c = tmp.path().join("c");
    let mut args = vec!["flick".to_string(), "cluster".into(), "--embeddings".into(), s(&fx.unlabeled), "--out".into(), s(&c)];
    args.extend(SMALL.iter().map(|a| a.to_string()));
    assert_eq!(cli::run(&args), 0);

    let r = tmp.path().join("r");
    let mut args = vec![
        "flick".to_string(), "refine".into(), "--embeddings".into(), s(&fx.unlabeled),
        "--pseudo-labels".into(), s(&c.join("pseudo_labels.jsonl")),
        "--cluster-model".into(), s(&c.join(report::CLUSTER_MODEL_FILE)), "--out".into(), s(&r),
    ];
    args.extend(SMALL.iter().map(|a| a.to_string()));
    assert_eq!(cli::run(&args), 0);
    assert!(r.join(report::CLUSTER_REPORT_FILE).exists());

    let t = tmp.path().join("t");
    let args = [
        "flick", "train", "--embeddings", &s(&fx.labeled), "--labels", &s(&fx.labeled_labels),
        "--shots", "5", "--out", &s(&t), "--profile", "proxy", "--set", "hidden_size=16", "--set", "clsft.epochs=300",
    ];
    assert_eq!(cli::run(args), 0);

    let e = tmp.path().join("e");
    let args = [
        "flick", "eval", "--model", &s(&t.join("model.json")), "--embeddings", &s(&fx.heldout),
        "--labels", &s(&fx.heldout_labels), "--out", &s(&e),
    ];
    assert_eq!(cli::run(args), 0);
    let m: serde_json::Value = report::read_json(e.join(report::METRICS_FILE)).unwrap();
    assert!(m["accuracy"].as_f64().unwrap() > 0.5);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(cli::run(["flick", "run", "--bogus-flag"]), 2);
    assert_eq!(cli::run(["flick", "synth", "--out", &s(tmp.path()), "--classes", "1"]), 2);

    let garbage = tmp.path().join("bad.flke");
    std::fs::write(&garbage, b"NOPE").unwrap();
    assert_eq!(cli::run(["flick", "cluster", "--embeddings", &s(&garbage), "--out", &s(&tmp.path().join("o"))]), 3);

    let fx = synth(&tmp.path().join("fx"));
    let mut args = run_args(&fx, &tmp.path().join("o2"), "flick");
    args.extend(["--set".into(), "k_top=0".into()]);
    assert_eq!(cli::run(&args), 2);

    let mut args = run_args(&fx, &tmp.path().join("o3"), "baseline");
    args.extend(["--set".into(), "learning_rate=1e300".into(), "--set".into(), "epsilon=1e-300".into()]);
    assert_eq!(cli::run(&args), 4);
}
