//! End-to-end runs of the `roughvol` binary.

use std::path::Path;
use std::process::{Command, Output};

fn roughvol(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roughvol")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_filter_nested_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&roughvol(&["simulate", "--hurst", "0.2", "--b", "3000", "--delta", "1/120", "--seed", "4", "--out", "sim"], d));
    let meta = std::fs::read_to_string(d.join("sim/obs.meta")).unwrap();
    assert!(meta.contains("model=liouville") && meta.contains("kind=exp") && meta.contains("seed=4"));
    assert_eq!(std::fs::read_to_string(d.join("sim/truth.csv")).unwrap().lines().count(), 122);
    assert!(std::fs::read_to_string(d.join("sim/manifest.txt")).unwrap().contains("obs.csv"));

    ok(&roughvol(&["filter", "--obs", "sim/obs.csv", "--particles", "50", "--out", "boot"], d));
    let post = std::fs::read_to_string(d.join("boot/posterior.csv")).unwrap();
    assert_eq!(post.lines().next(), Some("step,time,state_mean,state_q01,state_q99"));
    assert_eq!(post.lines().count(), 121);

    ok(&roughvol(&["nested", "--obs", "sim/obs.csv", "--outer", "10", "--inner", "20", "--out", "nest"], d));
    let theta = std::fs::read_to_string(d.join("nest/theta.csv")).unwrap();
    assert_eq!(theta.lines().count(), 11);
    let hist = std::fs::read_to_string(d.join("nest/hist.csv")).unwrap();
    let total: usize = hist.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 10);
}

#[test]
fn filter_reproduces_the_scenario_posterior() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("s.cfg"), "name = s\nmodel = liouville\nH = 0.3\nb = 2000\nT = 1\ndelta = 1/96\nM = 40\nseeds = 7\n").unwrap();
    ok(&roughvol(&["scenario", "--config", "s.cfg", "--out", "run"], d));
    let seed_dir = d.join("run/H0.3_b2000_N96/seed_007");
    let obs = seed_dir.join("obs.csv");
    ok(&roughvol(&["filter", "--obs", obs.to_str().unwrap(), "--particles", "40", "--seed", "7", "--out", "again"], d));
    assert_eq!(
        std::fs::read(seed_dir.join("bootstrap.csv")).unwrap(),
        std::fs::read(d.join("again/posterior.csv")).unwrap()
    );
}

#[test]
fn non_rough_models_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&roughvol(&["simulate", "--model", "ou_ou", "--b", "47000", "--horizon", "1", "--delta", "1/240", "--out", "ou"], d));
    assert!(std::fs::read_to_string(d.join("ou/obs.meta")).unwrap().contains("kind=square"));
    ok(&roughvol(&["simulate", "--model", "abs_bm", "--b", "3200", "--delta", "1/480", "--out", "abs"], d));
    // H is forbidden for non-fractional models.
    assert_eq!(roughvol(&["simulate", "--model", "abs_bm", "--hurst", "0.2", "--out", "bad"], d).status.code(), Some(1));
}

#[test]
fn check_writes_probe_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&roughvol(&["check", "--diffusion-seeds", "2", "--continuity-seeds", "1", "--out", "chk"], d));
    let med = std::fs::read_to_string(d.join("chk/continuity_median.csv")).unwrap();
    assert_eq!(med.lines().nth(1), Some("0.0000000000000000e0,0.0000000000000000e0"));
    assert_eq!(std::fs::read_to_string(d.join("chk/diffusion_limit.csv")).unwrap().lines().count(), 7);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(roughvol(&["frobnicate"], d).status.code(), Some(1));
    assert_eq!(roughvol(&["--help"], d).status.code(), Some(0));
    assert_eq!(roughvol(&["scenario", "nope", "--out", "x"], d).status.code(), Some(1));
    std::fs::write(d.join("bad.cfg"), "name = b\nmodel = liouville\nH = 0.1\nb = 1\nT = 1\ndelta = 1/7.5\nM = 3\n").unwrap();
    let out = roughvol(&["scenario", "--config", "bad.cfg", "--out", "x"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(!d.join("x").exists() && !d.join("x.partial").exists());
    assert_eq!(roughvol(&["filter", "--obs", "missing.csv", "--out", "y"], d).status.code(), Some(3));

    // A count far above anything the intensity can produce from the prior
    // cloud: every weight underflows to zero.
    std::fs::write(d.join("o.csv"), "step,count\n1,5000\n2,1\n").unwrap();
    std::fs::write(d.join("o.meta"), "delta=0.5\nT=1\nb=0\nkind=exp\nseed=1\nmodel=liouville\nH=0.2\n").unwrap();
    let out = roughvol(&["filter", "--obs", "o.csv", "--particles", "5", "--out", "z"], d);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(!d.join("z").exists());
}
