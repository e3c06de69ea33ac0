use std::path::Path;
use std::process::{Command, Output};

fn stickylab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stickylab"))
        .args(args)
        .env_remove("STICKYLAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn analytic_table_rows() {
    let o = stickylab(&["analytic", "--seed", "1", "--set", "points=[0]"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row, vec![0.0, 2.0]);

    let o = stickylab(&["analytic", "--set", "gamma=0", "--set", "interval=[0, 1]", "--set", "points=[0.5]", "--set", "probes=[0.25]"]);
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "x,G,g_2.5000000000000000e-1");
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row, vec![0.5, 0.25, 0.25]);
}

#[test]
fn analytic_point_outside_interval_is_usage_error() {
    let o = stickylab(&["analytic", "--set", "points=[3]"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, "seed = 1\ngama = 2\n").unwrap();
    let o = stickylab(&["analytic", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = stickylab(&["verify", "--suite", "nonsense", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_requires_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = stickylab(&["simulate", "--paths", "5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn simulate_into(dir: &Path, method: &str, workers: &str) {
    let o = stickylab(&[
        "simulate", "--seed", "42", "--method", method, "--paths", "1000", "--workers", workers, "--out", dir.to_str().unwrap(),
        "--set", "spacing=0.02", "--set", "epsilon=0.05",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_writes_one_value_per_path_with_manifest() {
    for method in ["time-change", "regularized"] {
        let dir = tempfile::tempdir().unwrap();
        simulate_into(dir.path(), method, "2");
        let samples = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
        let lines: Vec<&str> = samples.lines().collect();
        assert_eq!(lines[0], "path,x");
        assert_eq!(lines.len(), 1001);
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["master_seed"], 42);
        assert_eq!(manifest["config"]["method"], method);
        assert_eq!(manifest["files"][0], "samples.csv");
    }
}

#[test]
fn simulate_is_byte_identical_across_runs_and_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate_into(a.path(), "time-change", "1");
    simulate_into(b.path(), "time-change", "3");
    for f in ["samples.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn simulate_trajectories_on_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = stickylab(&[
        "simulate", "--seed", "5", "--method", "regularized", "--paths", "3", "--format", "csv", "--out",
        dir.path().to_str().unwrap(), "--set", "grid_points=10", "--set", "epsilon=0.1",
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "path,t,x");
    assert_eq!(text.lines().count(), 1 + 3 * 11);
}

#[test]
fn verify_analytic_suite_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = stickylab(&["verify", "--suite", "analytic", "--seed", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS") || l.starts_with("verify:")));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify-report.json")).unwrap()).unwrap();
    assert_eq!(report["suite"], "analytic");
}

#[test]
fn couple_ladder_with_small_budget_is_flagged() {
    let o = stickylab(&[
        "couple", "--experiment", "ladder", "--seed", "3", "--format", "json", "--set", "trials=20", "--set", "n=[5]",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reports: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(reports[0]["insufficient_sample"], true);
    assert_eq!(reports[0]["parameters"]["n"], 5);
}

#[test]
fn couple_trajectory_csv_columns() {
    let o = stickylab(&["couple", "--experiment", "trajectory", "--seed", "3", "--set", "horizon=0.01", "--set", "epsilon=0.1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().next().unwrap(), "t,x,y,z");
    assert_eq!(text.lines().count(), 1 + 1 + 25);
}
