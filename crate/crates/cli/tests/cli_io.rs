//! End-to-end checks of the binary: reproducibility, exit codes, artifact
//! shapes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_manifold-mc"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn identical_config_and_seed_reproduce_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    write(
        &conf,
        "manifold.kind = torus\nrun.n_steps = 5000\nrun.stride = 50\nrun.seed = 11\n",
    );
    for out in ["a", "b"] {
        let status = bin()
            .args(["sample", "--config"])
            .arg(&conf)
            .args(["--out"])
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(
        read(&dir.path().join("a/samples.csv")),
        read(&dir.path().join("b/samples.csv"))
    );
    assert_eq!(
        read(&dir.path().join("a/histogram.csv")),
        read(&dir.path().join("b/histogram.csv"))
    );
    // summary.json is identical except the wall-time field.
    let mut a: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("a/summary.json"))).unwrap();
    let mut b: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("b/summary.json"))).unwrap();
    a["wall_time_s"] = 0.into();
    b["wall_time_s"] = 0.into();
    assert_eq!(a, b);
}

#[test]
fn different_seed_changes_samples() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    write(&conf, "manifold.kind = torus\nrun.n_steps = 2000\nrun.stride = 50\n");
    for (out, seed) in [("a", "1"), ("b", "2")] {
        let status = bin()
            .args(["sample", "--config"])
            .arg(&conf)
            .args(["--seed", seed, "--out"])
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_ne!(
        read(&dir.path().join("a/samples.csv")),
        read(&dir.path().join("b/samples.csv"))
    );
}

#[test]
fn zero_steps_yields_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    write(&conf, "manifold.kind = torus\nrun.n_steps = 0\n");
    let status = bin()
        .args(["sample", "--config"])
        .arg(&conf)
        .args(["--out"])
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(&dir.path().join("o/samples.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "expected comment + header only, got {csv:?}");
    assert!(lines[0].starts_with("# seed="));
    assert!(lines[1].starts_with("step,"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    write(&conf, "manifold.kind = torus\nrun.n_steps = 10\nmystery.key = 1\n");
    let out = bin()
        .args(["sample", "--config"])
        .arg(&conf)
        .args(["--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mystery.key"));
}

#[test]
fn unknown_suite_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    write(&conf, "validate.suite = not-a-suite\n");
    let out = bin()
        .args(["validate", "--config"])
        .arg(&conf)
        .args(["--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stage_failure_is_a_numerical_error() {
    // A microscopic innermost ball with a tiny budget: no chain point lands
    // inside, the stage fails, exit code 3.
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    write(
        &conf,
        "manifold.kind = torus\nintegrate.n_total = 200\nintegrate.stages = 2\n\
         integrate.x0 = 1.5, 0, 0\nintegrate.r0 = 3.0\nintegrate.rk = 1e-4\n",
    );
    let out = bin()
        .args(["integrate", "--config"])
        .arg(&conf)
        .args(["--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn overrides_take_precedence_over_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    write(&conf, "manifold.kind = torus\nrun.n_steps = 999999\nrun.stride = 50\n");
    let status = bin()
        .args(["sample", "--config"])
        .arg(&conf)
        .args(["--override", "run.n_steps=1000", "--out"])
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert!(status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("o/summary.json"))).unwrap();
    assert_eq!(summary["n_steps"], 1000);
}

#[test]
fn analyze_nu_emits_grid_and_argmins() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    write(&conf, "analyze.d = 3\nanalyze.points = 20\n");
    let status = bin()
        .args(["analyze-nu", "--config"])
        .arg(&conf)
        .args(["--out"])
        .arg(dir.path().join("o"))
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(&dir.path().join("o/nu_models.csv"));
    assert!(csv.contains("# argmin_g_const="));
    assert!(csv.contains("nu,g_const,g_diffusive,l_brownian"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 21);
}

#[test]
fn validate_writes_report_and_passes_fast_suite() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    write(&conf, "validate.suite = jacobian-symmetry\n");
    let out = bin()
        .args(["validate", "--config"])
        .arg(&conf)
        .args(["--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("o/report.json"))).unwrap();
    assert_eq!(report["passed"], true);
    assert!(String::from_utf8_lossy(&out.stdout).contains("[PASS]"));
}

#[test]
fn cluster_edge_list_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("square.edges");
    write(&edges, "4\n1 2\n2 3\n3 4\n4 1\n");
    let conf = dir.path().join("run.conf");
    write(
        &conf,
        &format!(
            "manifold.kind = cluster-file\nmanifold.edge_list = {}\n\
             manifold.start = 0.5,0.5,0, -0.5,0.5,0, -0.5,-0.5,0, 0.5,-0.5,0\n\
             run.n_steps = 2000\nrun.stride = 100\nrun.seed = 3\n",
            edges.display()
        ),
    );
    let out = bin()
        .args(["sample", "--config"])
        .arg(&conf)
        .args(["--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("o/summary.json"))).unwrap();
    assert_eq!(summary["stored_samples"], 20);
    assert!(summary["acceptance_fraction"].as_f64().unwrap() > 0.05);
    // The rigidity-weight observable is defined for cluster runs.
    let names: Vec<_> = summary["observables"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["name"].as_str().unwrap().to_string())
        .collect();
    assert!(names.contains(&"rigidity_weight".to_string()));
}
