use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn eventcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eventcast"))
        .args(args)
        .output()
        .expect("spawn eventcast")
}

fn ok(args: &[&str]) -> Output {
    let out = eventcast(args);
    assert!(
        out.status.success(),
        "eventcast {args:?} exited with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn digest(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small panel dense enough to populate groups B and C.
fn small_panel(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("panel.csv");
    ok(&["synth", "--seed", "3", "--districts", "60", "--base-log-rate", "-2.5", "--out", p(&out)]);
    out
}

fn light_run(panel: &Path, out_dir: &Path, jobs: &str) {
    ok(&[
        "run", "--in", p(panel), "--seed", "11", "--out-dir", p(out_dir), "--tasks", "T1,T7", "--rf-trees", "6",
        "--gb-stages", "10", "--jobs", jobs,
    ]);
}

#[test]
fn synth_is_deterministic_and_seed_dependent() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    for (seed, path) in [("5", &a), ("5", &b), ("6", &c)] {
        ok(&["synth", "--seed", seed, "--districts", "20", "--months", "24", "--out", p(path)]);
    }
    assert_eq!(digest(&a), digest(&b));
    assert_ne!(digest(&a), digest(&c));
}

#[test]
fn usage_errors_exit_2_and_runtime_errors_exit_1() {
    assert_eq!(eventcast(&["bogus"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.csv");
    assert_eq!(eventcast(&["synth", "--out", p(&out)]).status.code(), Some(2));
    assert_eq!(eventcast(&["run", "--in", "panel.csv", "--out-dir", "o"]).status.code(), Some(2));
    let missing = eventcast(&["group", "--in", p(&dir.path().join("missing.csv")), "--out-dir", p(dir.path())]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
    assert_eq!(eventcast(&["--help"]).status.code(), Some(0));
}

#[test]
fn explicit_flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("eventcast.conf");
    fs::write(&cfg, "# defaults\nseed = 4\ndistricts = 7\nmonths = 24\n").unwrap();
    let from_file = dir.path().join("f.csv");
    let overridden = dir.path().join("o.csv");
    ok(&["--config", p(&cfg), "synth", "--out", p(&from_file)]);
    ok(&["synth", "--config", p(&cfg), "--districts", "9", "--out", p(&overridden)]);
    let rows = |path: &Path| fs::read_to_string(path).unwrap().lines().count() - 1;
    assert_eq!(rows(&from_file), 7 * 24);
    assert_eq!(rows(&overridden), 9 * 24);

    fs::write(&cfg, "no_such_flag = 1\n").unwrap();
    assert_eq!(eventcast(&["--config", p(&cfg), "synth", "--seed", "1", "--out", p(&from_file)]).status.code(), Some(2));
}

#[test]
fn group_writes_assignment_summary_and_histogram() {
    let dir = TempDir::new().unwrap();
    let panel = small_panel(dir.path());
    let out = dir.path().join("groups");
    ok(&["group", "--in", p(&panel), "--out-dir", p(&out)]);
    let assignment = fs::read_to_string(out.join("assignment.csv")).unwrap();
    assert_eq!(assignment.lines().next(), Some("district_id,ane,group"));
    assert_eq!(assignment.lines().count(), 61);
    let summary = fs::read_to_string(out.join("group_summary.csv")).unwrap();
    let total: usize = summary.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 60);
    assert!(out.join("ane_histogram.csv").exists());
}

#[test]
fn run_is_reproducible_across_job_counts() {
    let dir = TempDir::new().unwrap();
    let panel = small_panel(dir.path());
    let (serial, parallel) = (dir.path().join("serial"), dir.path().join("parallel"));
    light_run(&panel, &serial, "1");
    light_run(&panel, &parallel, "3");
    for name in ["results.csv", "traces.csv", "importances.csv", "table_B.csv", "table_C.txt"] {
        assert_eq!(digest(&serial.join(name)), digest(&parallel.join(name)), "{name}");
    }
    let results = fs::read_to_string(serial.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2 * 5 * 4);
    let errors = fs::read_to_string(serial.join("errors.csv")).unwrap();
    assert_eq!(errors.lines().count(), 1, "{errors}");
}

#[test]
fn failed_cells_are_listed_and_exit_1() {
    let dir = TempDir::new().unwrap();
    let panel = small_panel(dir.path());
    let out = dir.path().join("run");
    let status = eventcast(&[
        "run", "--in", p(&panel), "--seed", "1", "--out-dir", p(&out), "--tasks", "T1", "--groups", "B", "--sid",
        "Z1-3", "--models", "LR,0",
    ]);
    assert_eq!(status.status.code(), Some(1));
    let errors = fs::read_to_string(out.join("errors.csv")).unwrap();
    assert_eq!(errors.lines().count(), 1 + 3);
    assert!(errors.contains("Z1"));
    assert_eq!(fs::read_to_string(out.join("results.csv")).unwrap().lines().count(), 1 + 2 * 2);
}

#[test]
fn plotdata_writes_every_figure() {
    let dir = TempDir::new().unwrap();
    let panel = small_panel(dir.path());
    let run_dir = dir.path().join("run");
    ok(&[
        "run", "--in", p(&panel), "--seed", "2", "--out-dir", p(&run_dir), "--tasks", "T6", "--variants", "V5",
        "--rf-trees", "6", "--gb-stages", "10", "--jobs", "1",
    ]);
    let plots = dir.path().join("plots");
    ok(&["plotdata", "--in", p(&panel), "--results-dir", p(&run_dir), "--out-dir", p(&plots)]);
    for name in [
        "fig1_ane_histogram.csv",
        "fig2_components_B.csv",
        "fig2_components_C.csv",
        "fig3_traces_B_T6V5.csv",
        "fig3_traces_C_T6V5.csv",
        "fig4_importance_B_V5.csv",
        "fig4_importance_C_V5.csv",
    ] {
        assert!(plots.join(name).exists(), "{name}");
    }
    let fig3 = fs::read_to_string(plots.join("fig3_traces_C_T6V5.csv")).unwrap();
    assert_eq!(fig3.lines().count(), 13);
    let fig2 = fs::read_to_string(plots.join("fig2_components_B.csv")).unwrap();
    assert_eq!(fig2.lines().count(), 85);
}
