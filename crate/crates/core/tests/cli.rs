//! End-to-end runs of the `bcc` binary: exit codes and output files.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn bcc(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_bcc")).args(args).output().expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Simulates a 20-subject dataset and writes a short-run fit config next to it.
fn simulated(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let scenario = dir.join("scenario.json");
    std::fs::write(&scenario, r#"{"K": 2, "cluster_sizes": [10], "alpha": [1.0, 1.0, 1.0], "seed": 4}"#).unwrap();
    let sim = dir.join("sim");
    let (code, _, err) = bcc(&["simulate", "--config", s(&scenario), "--out", s(&sim), "--seed", "9"]);
    assert_eq!(code, 0, "{err}");
    let rep = sim.join("rep_001");
    let mut config: Value = serde_json::from_str(&std::fs::read_to_string(rep.join("fit_config.json")).unwrap()).unwrap();
    config["mcmc"]["burnin"] = 150.into();
    config["mcmc"]["iterations"] = 400.into();
    let short = dir.join("short.json");
    std::fs::write(&short, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    (rep.join("data.csv"), short, rep.join("truth_clusters.csv"))
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bcc(&[]).0, 2);
    assert_eq!(bcc(&["frobnicate"]).0, 2);
    assert_eq!(bcc(&["fit", "--data", "x.csv"]).0, 2);
    assert_eq!(bcc(&["--help"]).0, 0);
}

#[test]
fn missing_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let (code, _, err) = bcc(&["fit", "--data", "/nonexistent/data.csv", "--config", "/nonexistent/c.json", "--out", s(&out)]);
    assert_eq!(code, 2, "{err}");
    assert_eq!(bcc(&["diagnose", s(dir.path())]).0, 2);
}

#[test]
fn invalid_config_and_range_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (data, config, _) = simulated(dir.path());
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&config).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("K");
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, v.to_string()).unwrap();
    let out = dir.path().join("fit");
    let (code, _, err) = bcc(&["fit", "--data", s(&data), "--config", s(&broken), "--out", s(&out)]);
    assert_eq!(code, 2, "{err}");

    let (code, _, _) = bcc(&["select-k", "--data", s(&data), "--config", s(&config), "--out", s(&out), "--k-range", "1..3"]);
    assert_eq!(code, 2);
    let (code, _, _) = bcc(&["fit", "--data", s(&data), "--config", s(&config), "--out", s(&out), "--chains", "0"]);
    assert_eq!(code, 2);
}

#[test]
fn fit_diagnose_metrics_round() {
    let dir = tempfile::tempdir().unwrap();
    let (data, config, truth) = simulated(dir.path());
    let fit = dir.path().join("fit");
    let (code, _, err) = bcc(&["fit", "--data", s(&data), "--config", s(&config), "--out", s(&fit), "--seed", "3"]);
    assert_eq!(code, 0, "{err}");
    for f in ["summary.json", "clusters.csv", "trace.csv", "manifest.json", "relabel_permutations.csv", "draws/layout.json"] {
        assert!(fit.join(f).exists(), "missing {f}");
    }
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(fit.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["K"], 2);
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(fit.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);

    let (code, _, err) = bcc(&["diagnose", s(&fit)]);
    assert_eq!(code, 0, "{err}");
    for f in ["geweke.csv", "ppc.csv", "diagnostics.json"] {
        assert!(fit.join("diagnostics").join(f).exists(), "missing {f}");
    }

    let (code, stdout, err) = bcc(&["metrics", s(&truth), s(&fit.join("clusters.csv"))]);
    assert_eq!(code, 0, "{err}");
    let m: Value = serde_json::from_str(&stdout).unwrap();
    let ari = m["aRand"].as_f64().unwrap();
    assert!((-1.0..=1.0).contains(&ari));

    let other = dir.path().join("other.csv");
    std::fs::write(&other, "subject,C\nX1,1\nX2,2\n").unwrap();
    assert_eq!(bcc(&["metrics", s(&truth), s(&other)]).0, 2);
}

#[test]
fn repeated_fit_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (data, config, _) = simulated(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let (code, _, err) = bcc(&["fit", "--data", s(&data), "--config", s(&config), "--out", s(out), "--seed", "21", "--chains", "2"]);
        assert_eq!(code, 0, "{err}");
    }
    for f in ["summary.json", "clusters.csv", "trace.csv", "draws/draws_params.csv", "draws/draws_labels.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn select_k_writes_scores() {
    let dir = tempfile::tempdir().unwrap();
    let (data, config, _) = simulated(dir.path());
    let out = dir.path().join("sel");
    let (code, _, err) = bcc(&["select-k", "--data", s(&data), "--config", s(&config), "--out", s(&out), "--k-range", "2,3"]);
    assert_eq!(code, 0, "{err}");
    let sel: Value = serde_json::from_str(&std::fs::read_to_string(out.join("k_selection.json")).unwrap()).unwrap();
    let k = sel["K_hat"].as_u64().unwrap();
    assert!(k == 2 || k == 3);
    assert!(out.join("adherence_by_k.csv").exists());
}
