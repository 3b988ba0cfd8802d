use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.cfg"))
}

fn hiercontrol(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hiercontrol"));
    cmd.args(args).env_remove("HIERCONTROL_THREADS");
    if let Some(t) = threads {
        cmd.env("HIERCONTROL_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn edited(dir: &Path, name: &str, from: &str, to: &str) -> PathBuf {
    let text = fs::read_to_string(scenario_path(name)).unwrap();
    assert!(text.contains(from), "{from} not in {name}");
    let path = dir.join(format!("{name}_edited.cfg"));
    fs::write(&path, text.replacen(from, to, 1)).unwrap();
    path
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn negative_control_cost_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "lq_small", "mu1 = 1.0", "mu1 = -1.0");
    let out = dir.path().join("out");
    let o = hiercontrol(&["nash", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("costs.mu1"));
}

#[test]
fn bad_thread_count_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario_path("lq_small");
    for bad in ["0", "many"] {
        let o = hiercontrol(
            &["weights", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
            Some(bad),
        );
        assert_eq!(code(&o), 2, "HIERCONTROL_THREADS={bad}");
    }
}

#[test]
fn unknown_key_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited(dir.path(), "lq_small", "[costs]", "[costs]\nmu3 = 1.0");
    let o = hiercontrol(&["nash", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
}

#[test]
fn failed_verification_exits_with_budget_code() {
    // On this coarse 2D grid the observability ratio moves by more than a factor of two
    // under refinement.
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario_path("heat_2d"))
        .unwrap()
        .replacen("cells = 24", "cells = 16", 1)
        .replacen("steps = 48", "steps = 32", 1);
    let cfg = dir.path().join("coarse.cfg");
    fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let o = hiercontrol(
        &["verify", "--suite", "observability", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(code(&o), 4);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verify_report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn verify_passes_on_the_small_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario_path("lq_small");
    let o = hiercontrol(&["verify", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify_report.json")).unwrap()).unwrap();
    for suite in ["duality", "nash-oracle", "second-order", "observability", "carleman"] {
        assert_eq!(report["suites"][suite]["pass"], true, "{suite}");
    }
}

#[test]
fn weights_dump_has_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario_path("lq_small");
    let o = hiercontrol(
        &["weights", "dump", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        None,
    );
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("weights.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,beta,nu,rho_hat"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    // interior time slices times all nodes of a 16-cell grid
    assert_eq!(rows.len(), 31 * 17);
    assert!(rows.iter().all(|r| r.len() == 5 && r[3] < 0.0 && r[2] > 0.0));
}

#[test]
fn solve_output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario_path("lq_drift");
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = hiercontrol(
            &["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
            Some(threads),
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(out);
    }
    for name in ["u.csv", "y.csv", "v1.csv", "v2.csv", "solve_summary.json"] {
        assert_eq!(
            fs::read(outputs[0].join(name)).unwrap(),
            fs::read(outputs[1].join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn leader_flags_override_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario_path("heat_1d");
    let o = hiercontrol(
        &[
            "leader", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(),
            "--epsilon", "1e-2", "--cg-tol", "1e-10", "--cg-max", "300",
        ],
        None,
    );
    assert_eq!(code(&o), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("leader_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["epsilon"], 1e-2);
    let o = hiercontrol(
        &["leader", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--epsilon=-1"],
        None,
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn exhausted_outer_iterations_report_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario_path("mild_nonlinear_1d");
    let out = dir.path().join("out");
    let o = hiercontrol(
        &["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--max-outer", "1"],
        None,
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    // partial results are still written
    assert!(out.join("solve_summary.json").exists());
}
