//! End-to-end checks of the command-line tool.

use std::path::Path;
use std::process::{Command, Output};

fn simground(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simground"))
        .args(args)
        .env("SIMGROUND_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_tasks_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let out = simground(&["gen-tasks", "--family", "bowling", "--out", p(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.jsonl")).unwrap();
    assert_eq!(manifest.lines().count(), 100);

    let again = simground(&["gen-tasks", "--family", "bowling", "--out", p(dir.path())]);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("error:"));

    let forced = simground(&["gen-tasks", "--family", "bowling", "--out", p(dir.path()), "--force"]);
    assert!(forced.status.success());
}

#[test]
fn gradient_without_a_surface_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = simground(&[
        "iplw", "--family", "basketball", "--strategy", "gradient", "--out", p(dir.path()),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("surface"), "{err}");

    let missing = dir.path().join("nope.json");
    let out = simground(&[
        "iplw", "--family", "basketball", "--strategy", "gradient", "--surface", p(&missing),
        "--out", p(&dir.path().join("run")),
    ]);
    assert!(!out.status.success());
}

#[test]
fn unknown_family_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = simground(&["gen-tasks", "--family", "pinball", "--out", p(dir.path())]);
    assert!(!out.status.success());
}

#[test]
fn transfer_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = simground(&[
            "transfer", "--family", "basketball", "--ranker", "direct", "--seed", "3", "--out",
            p(&path),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (
            std::fs::read_to_string(&path).unwrap(),
            std::fs::read_to_string(path.with_extension("csv")).unwrap(),
        )
    };
    let (a_json, a_csv) = run("a.json");
    let (b_json, b_csv) = run("b.json");
    assert_eq!(a_json, b_json);
    assert_eq!(a_csv, b_csv);
    assert!(a_csv.starts_with("k,w_k,s_k\n"));
    assert_eq!(a_csv.lines().count(), 101);
}

#[test]
fn short_iplw_run_writes_its_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "family = \"basketball\"\nstrategies = [\"random\"]\nseeds = [50]\nout = \"runs\"\n\
         [iplw]\nrounds = 2\nactions_per_round = 10\ncandidate_pool = 50\n\
         [cem]\nrounds = 1\nsamples_per_round = 4\nelite_count = 2\n",
    )
    .unwrap();
    let out = simground(&["run", "--config", p(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = dir.path().join("runs");
    for f in ["config.toml", "summary.csv", "summary.json", "results.json"] {
        assert!(runs.join(f).exists(), "missing {f}");
    }
    let seed = runs.join("random").join("seed-50");
    for f in ["iplw_log.json", "theta.json", "auccess.json", "auccess.csv"] {
        assert!(seed.join(f).exists(), "missing {f}");
    }
    let log: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(seed.join("iplw_log.json")).unwrap()).unwrap();
    assert_eq!(log["data"]["real_rollouts"], 20);

    // A second run into the same directory needs --force.
    assert!(!simground(&["run", "--config", p(&cfg)]).status.success());
    assert!(simground(&["run", "--config", p(&cfg), "--force"]).status.success());

    let report_dir = dir.path().join("report");
    let out = simground(&["report", "--runs", p(&runs), "--out", p(&report_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("strategy,"));
}
