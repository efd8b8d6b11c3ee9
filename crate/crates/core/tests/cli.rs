use std::path::Path;
use std::process::{Command, Output};

fn nfbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfbp")).args(args).output().expect("spawn nfbp")
}

fn smoke_with_grid_center(z: f64) -> String {
    let src = include_str!("../scenarios/smoke.toml");
    src.replace("center = [0.0, 0.0, 0.0]", &format!("center = [0.0, 0.0, {z}]"))
}

#[test]
fn validate_bundled_scenario() {
    let out = nfbp(&["validate", "--scenario", "smoke"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

#[test]
fn validate_rejects_grid_behind_aperture() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, smoke_with_grid_center(0.2)).unwrap();
    let out = nfbp(&["validate", "--scenario", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid must satisfy R_z < 0"));
}

#[test]
fn synth_reconstruct_project_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let d = |p: &str| dir.path().join(p).display().to_string();

    let out = nfbp(&["synth", "--scenario", "smoke", "--out", &d("data"), "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dataset = d("data/dataset.csv");
    assert!(Path::new(&dataset).exists());

    let out = nfbp(&[
        "reconstruct", "--scenario", "smoke", "--dataset", &dataset, "--out", &d("img"), "--operator", "F1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let volume = d("img/F1/volume.nfim");

    let out = nfbp(&["project", "--volume", &volume, "--out", &d("mip"), "--axis", "z"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("mip/mip_z.png").exists());

    let out = nfbp(&["metrics", "--volume", &volume, "--scenario", "smoke"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success());
    assert!(text.contains("entropy = ") && text.contains("artifact_level_db = "), "{text}");
}

#[test]
fn run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = nfbp(&["run", "--scenario", "smoke", "--out", dir.path().to_str().unwrap(), "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("report.toml")).unwrap();
    assert_eq!(report, String::from_utf8_lossy(&out.stdout));
}
