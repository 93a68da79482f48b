use std::path::Path;
use std::process::Command;

use pcsinit_cli::config::ExperimentConfig;
use pcsinit_cli::experiment;
use pcsinit_core::data::{self, SyntheticKind};
use pcsinit_core::training::predict_classes;
use pcsinit_core::Variant;

fn pcsinit(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pcsinit")).args(args).output().unwrap()
}

fn small_args(out: &Path) -> Vec<String> {
    [
        "--repeats", "2", "--epochs", "12", "--n-frozen", "4", "--set", "synthetic_n=120", "--set", "synthetic_p=10",
        "--out",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([out.display().to_string()])
    .collect()
}

fn run_small(out: &Path, extra: &[&str]) -> std::process::Output {
    let mut args = vec!["run".to_string()];
    args.extend(small_args(out));
    args.extend(extra.iter().map(|s| s.to_string()));
    pcsinit(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_small(dir.path(), &["--shap-points", "2", "--set", "shap_coalitions=256"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let metrics = std::fs::read_to_string(dir.path().join("metrics.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = metrics.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2 * 5 * 12);
    for key in ["run_id", "variant", "epoch", "phase", "train_loss", "train_acc", "test_loss", "test_acc", "seconds"] {
        assert!(lines[0].get(key).is_some(), "missing {key}");
    }
    let phases: Vec<&str> = lines
        .iter()
        .filter(|l| l["variant"] == "pcsinit" && l["run_id"] == "r0")
        .map(|l| l["phase"].as_str().unwrap())
        .collect();
    assert_eq!(phases.iter().filter(|p| **p == "frozen").count(), 4);
    assert!(lines.iter().filter(|l| l["variant"] == "plain_nn").all(|l| l["phase"] == "unfrozen"));

    let timing = std::fs::read_to_string(dir.path().join("timing.csv")).unwrap();
    assert_eq!(timing.lines().count(), 1 + 2 * 5 * 12);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["variants"].as_array().unwrap().len(), 5);
    assert_eq!(summary["variants"][0]["mean_curve"].as_array().unwrap().len(), 12);

    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("theorem_reports.json")).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 6);

    for v in ["pcsinit", "pcsinit_act", "pcsinit_sub", "pca_nn", "plain_nn"] {
        for r in ["r0", "r1"] {
            assert!(dir.path().join(format!("models/{r}/{v}.bin")).exists());
        }
        let shap = dir.path().join("shap").join(v);
        assert!(shap.join("point_0.csv").exists() && shap.join("global_importance.csv").exists());
    }
    let pc = dir.path().join("shap/pca_nn");
    assert!(pc.join("point_1_components.csv").exists() && pc.join("heatmap_class_0.csv").exists());
}

#[test]
fn repeated_runs_are_identical_and_seeds_matter() {
    let read = |d: &Path| std::fs::read(d.join("summary.json")).unwrap();
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_small(a.path(), &[]).status.success());
    assert!(run_small(b.path(), &[]).status.success());
    assert!(run_small(c.path(), &["--seed", "7"]).status.success());
    assert_eq!(read(a.path()), read(b.path()));
    assert_ne!(read(a.path()), read(c.path()));
}

#[test]
fn saved_models_reload_and_predict_the_same() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    for (k, v) in [("repeats", "1"), ("epochs", "8"), ("n_frozen", "3"), ("synthetic_n", "100"), ("synthetic_p", "9")] {
        cfg.set(k, v).unwrap();
    }
    cfg.out = dir.path().to_path_buf();
    let result = experiment::run_experiment(&cfg).unwrap();
    let ds = experiment::load_dataset(&cfg).unwrap();
    let (_, test) = experiment::repeat_split(&cfg, &ds, 0).unwrap();
    for run in &result.runs {
        let (net, pipeline) = experiment::load_model(dir.path(), 0, &run.variant).unwrap();
        assert_eq!(net.layers(), run.outcome.net.layers());
        let x = pipeline.network_input(&test.features).unwrap();
        assert_eq!(predict_classes(&net, &x).unwrap(), predict_classes(&run.outcome.net, &x).unwrap());
    }
}

#[test]
fn csv_input_and_verbs() {
    let dir = tempfile::tempdir().unwrap();
    let kind = SyntheticKind::GaussianBlobs;
    let mut ds = data::make_synthetic(kind, 90, 6, 3, kind.default_params(), 2).unwrap();
    ds.feature_names = Some((0..6).map(|j| format!("f{j}")).collect());
    let csv = dir.path().join("blobs.csv");
    data::write_csv(&ds, std::fs::File::create(&csv).unwrap()).unwrap();
    let csv = csv.display().to_string();
    let out = dir.path().display().to_string();

    let pca = pcsinit(&["pca", "--dataset", &csv, "--out", &out]);
    assert!(pca.status.success(), "{}", String::from_utf8_lossy(&pca.stderr));
    assert!(dir.path().join("pca.json").exists() && dir.path().join("pca_report.csv").exists());

    let run = pcsinit(&[
        "run", "--dataset", &csv, "--repeats", "1", "--epochs", "6", "--n-frozen", "2", "--variant", "pcsinit",
        "--variant", "pca_nn", "--out", &out,
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let explain = pcsinit(&[
        "explain", "--dataset", &csv, "--variant", "pca_nn", "--shap-points", "3", "--set", "shap_coalitions=0", "--out", &out,
    ]);
    assert!(explain.status.success(), "{}", String::from_utf8_lossy(&explain.stderr));
    assert!(dir.path().join("shap/pca_nn/point_2.csv").exists());

    let verify = pcsinit(&["verify", "--dataset", &csv, "--out", &out]);
    assert!(verify.status.success(), "{}", String::from_utf8_lossy(&verify.stdout));
    assert_eq!(String::from_utf8_lossy(&verify.stdout).matches("PASS").count(), 6);
}

#[test]
fn bad_arguments_fail_cleanly() {
    let out = pcsinit(&["run", "--repeats", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("repeats"));
    let out = pcsinit(&["run", "--set", "nonsense=1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = pcsinit(&["run", "--dataset", "/nonexistent.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.conf");
    std::fs::write(&path, "repeats = 4\nseed = 3\nvariants = pcsinit_sub:0.3, plain_nn\n").unwrap();
    let mut cfg = ExperimentConfig::from_file(&path).unwrap();
    cfg.set("seed", "9").unwrap();
    assert_eq!((cfg.repeats, cfg.seed), (4, 9));
    assert_eq!(cfg.variants[1], Variant::PlainNn);
}
