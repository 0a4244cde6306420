//! End-to-end tests of the `gauzecut` binary: artifact layout, manifest
//! hashing, rerun/staged byte-identity, error records, and output routing.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gauzecut"));
    cmd.env_remove("GAUZECUT_OUT_ROOT");
    cmd
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn gauzecut");
    assert!(
        out.status.success(),
        "gauzecut {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn gauzecut");
    assert!(!out.status.success(), "gauzecut {args:?} unexpectedly succeeded");
    out
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("read {}: {e}", dir.join(name).display()))
}

/// Field from a one-record CSV (header + single data row).
fn csv_field(text: &str, column: &str) -> String {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().expect("header").split(',').collect();
    let row: Vec<&str> = lines.next().expect("data row").split(',').collect();
    let idx = header
        .iter()
        .position(|h| *h == column)
        .unwrap_or_else(|| panic!("column {column} not in {header:?}"));
    row[idx].to_string()
}

/// Small scenario (15x15 sheet, tiny search budget) so that full-pipeline
/// tests stay fast; the pattern is the shared 64-point circle.
fn small_scenario(dir: &Path) -> PathBuf {
    let path = dir.join("small.toml");
    let body = format!(
        "seed = 11\n\
         [cloth]\n\
         rows = 15\n\
         cols = 15\n\
         spacing_mm = 4.0\n\
         [pattern]\n\
         path = \"{}\"\n\
         [tension]\n\
         iterations = 2\n\
         population = 8\n\
         elite_fraction = 0.25\n\
         grasp_vertex = 32\n\
         [grasp]\n\
         candidates = [32, 198]\n",
        fixture("circle50.pattern").display()
    );
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn plan_reports_an_open_line_as_one_segment() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("line.toml");
    std::fs::write(
        &scenario,
        format!("seed = 3\n[pattern]\npath = \"{}\"\n", fixture("line.pattern").display()),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&["plan", "--scenario", scenario.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    let summary = read(&out_dir, "plan_summary.csv");
    assert_eq!(csv_field(&summary, "segments"), "1");
    assert_eq!(csv_field(&summary, "pattern_notches"), "0");
    assert_eq!(csv_field(&summary, "closed"), "0");
    let trajectory = read(&out_dir, "trajectory.csv");
    assert!(trajectory.starts_with("index,segment,new_segment,x_mm,y_mm\n"));
}

#[test]
fn stewart_ik_at_home_has_negligible_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("ik");
    run_ok(&["stewart", "ik", "--pose", "0,0,0,0,0,0", "--out", out_dir.to_str().unwrap()]);
    let csv = read(&out_dir, "ik.csv");
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        let residual: f64 = cells[2].parse().unwrap();
        assert!(residual.abs() < 1e-9, "leg {}: residual {residual}", cells[0]);
        assert_eq!(cells[3], "in_range");
    }
}

#[test]
fn pipeline_reruns_and_staged_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path());
    let s = scenario.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    run_ok(&["pipeline", "--scenario", s, "--out", a.to_str().unwrap()]);
    run_ok(&["pipeline", "--scenario", s, "--out", b.to_str().unwrap()]);
    run_ok(&["plan", "--scenario", s, "--out", c.to_str().unwrap()]);
    run_ok(&["grasp", "--scenario", s, "--out", c.to_str().unwrap()]);
    run_ok(&["execute", "--scenario", s, "--out", c.to_str().unwrap()]);
    let artifacts = [
        "trajectory.csv",
        "plan_summary.csv",
        "grasp_reports.csv",
        "grasp_winner.csv",
        "policy.txt",
        "episode.csv",
        "score.csv",
    ];
    for name in artifacts {
        let bytes_a = std::fs::read(a.join(name)).unwrap();
        assert_eq!(bytes_a, std::fs::read(b.join(name)).unwrap(), "rerun differs: {name}");
        assert_eq!(bytes_a, std::fs::read(c.join(name)).unwrap(), "staged differs: {name}");
    }
    // Same effective config -> same manifest hash line, for reruns of the
    // same command (manifests themselves differ only by timestamp).
    let hash_of = |d: &Path, m: &str| {
        read(d, m)
            .lines()
            .find(|l| l.starts_with("config_hash"))
            .expect("config_hash line")
            .to_string()
    };
    assert_eq!(hash_of(&a, "pipeline.manifest.toml"), hash_of(&b, "pipeline.manifest.toml"));
}

#[test]
fn seed_override_changes_the_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path());
    let s = scenario.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&["plan", "--scenario", s, "--out", a.to_str().unwrap()]);
    run_ok(&["plan", "--scenario", s, "--out", b.to_str().unwrap(), "--seed", "999"]);
    let manifest_a = read(&a, "plan.manifest.toml");
    let manifest_b = read(&b, "plan.manifest.toml");
    let hash = |m: &str| {
        m.lines().find(|l| l.starts_with("config_hash")).unwrap().to_string()
    };
    assert_ne!(hash(&manifest_a), hash(&manifest_b));
    assert!(manifest_b.contains("seed = 999"));
}

#[test]
fn unknown_scenario_keys_produce_an_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.toml");
    std::fs::write(&scenario, "seed = 1\nturbo = true\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = run_err(&[
        "plan",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("command = \"plan\""), "stderr: {stderr}");
    assert!(stderr.contains("turbo"), "stderr: {stderr}");
    let record = read(&out_dir, "error.toml");
    assert!(record.contains("unknown field `turbo`"), "record: {record}");
}

#[test]
fn execute_without_a_policy_explains_recovery() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path());
    let out_dir = dir.path().join("out");
    let out = run_err(&[
        "execute",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--policy"), "stderr: {stderr}");
    assert!(stderr.contains("train"), "stderr: {stderr}");
}

#[test]
fn bench_scores_are_identical_across_episodes() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path());
    let out_dir = dir.path().join("bench");
    run_ok(&[
        "bench",
        "--scenario",
        scenario.to_str().unwrap(),
        "--episodes",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let report = read(&out_dir, "bench.csv");
    assert_eq!(csv_field(&report, "episodes"), "5");
    assert_eq!(csv_field(&report, "scores_identical"), "1");
    // Timing lives in its own artifact so everything else stays
    // byte-reproducible.
    let timing = read(&out_dir, "bench_timing.csv");
    assert!(timing.starts_with("episodes,threads,wall_s"));
    assert!(!report.contains("wall_s"));
}

#[test]
fn sync_run_with_perfect_estimate_tracks_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("sync.toml");
    std::fs::write(&scenario, "seed = 5\n").unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&[
        "sync",
        "run",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let summary = read(&out_dir, "sync_run_summary.csv");
    assert_eq!(csv_field(&summary, "controller"), "full_sync");
    let max_error: f64 = csv_field(&summary, "max_error_mm").parse().unwrap();
    assert!(max_error < 1e-9, "max error {max_error}");
}

#[test]
fn sync_budget_reports_all_trials() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&[
        "sync",
        "budget",
        "--scenario",
        fixture("sync_intermittent.toml").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let summary = read(&out_dir, "sync_budget_summary.csv");
    assert_eq!(csv_field(&summary, "controller"), "intermittent");
    assert_eq!(csv_field(&summary, "trials"), "12");
    let per_trial = read(&out_dir, "sync_budget.csv");
    assert_eq!(per_trial.lines().count(), 13, "header + 12 trials");
}

#[test]
fn camera_map_recovers_the_image_translation() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    run_ok(&[
        "camera",
        "map",
        "--scenario",
        fixture("camera_rig.toml").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let pose = read(&out_dir, "camera_pose.csv");
    assert_eq!(csv_field(&pose, "outcome"), "in_range");
    let x_cm: f64 = csv_field(&pose, "x_cm").parse().unwrap();
    let y_cm: f64 = csv_field(&pose, "y_cm").parse().unwrap();
    assert!((x_cm - 0.3).abs() < 1e-9, "x_cm {x_cm}");
    assert!((y_cm + 0.2).abs() < 1e-9, "y_cm {y_cm}");
    let rigid = read(&out_dir, "camera_rigid.csv");
    assert!(rigid.starts_with("r11,r12,r13,tx,"));
}

#[test]
fn out_root_env_names_the_default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("GAUZECUT_OUT_ROOT", dir.path())
        .args(["stewart", "ik", "--pose", "0,0,0,0,0,0"])
        .output()
        .expect("spawn gauzecut");
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("stewart-ik").join("ik.csv").exists());
}
