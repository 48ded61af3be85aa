use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn divcol(dir: &Path, args: &[&str]) -> Output {
    let out = dir.join("out");
    Command::new(env!("CARGO_BIN_EXE_divcol"))
        .arg("run")
        .args(args)
        .arg("--set")
        .arg(format!("output={}", out.display()))
        .env_remove("DIVCOL_WORKERS")
        .output()
        .unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

#[test]
fn invalid_configurations_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    for set in [
        &["--set", "case=cavity3d", "--set", "geometry=wavy(1,0.75,1)"][..],
        &["--set", "case=vortex2d", "--set", "kprime=0"],
        &["--set", "case=vortex2d", "--set", "no_such_key=1"],
        &["--set", "case=cavity2d", "--set", "convergence=8,16"],
        &[],
    ] {
        let out = divcol(dir.path(), set);
        assert_eq!(out.status.code(), Some(2), "{set:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!dir.path().join("out/report.json").exists());
    }
}

#[test]
fn workers_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_divcol"))
        .args(["run", "--set", "case=vortex2d", "--set", "mesh=4"])
        .arg("--set")
        .arg(format!("output={}", dir.path().join("out").display()))
        .env("DIVCOL_WORKERS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn convergence_study_reports_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = divcol(dir.path(), &["--set", "case=vortex2d", "--set", "convergence=8,16", "--set", "sigma=1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["runs"].as_array().unwrap().len(), 2);
    for field in ["velocity", "pressure", "vorticity"] {
        let rate = r["rates"][field]["l2"][0].as_f64().unwrap();
        assert!(rate > 1.0, "{field} rate {rate}");
    }
    assert!(r["divergence_max"].as_f64().unwrap() < 1e-9);
    let profiles = fs::read_to_string(dir.path().join("out/profiles.csv")).unwrap();
    assert!(profiles.starts_with("axis,component,s,x,y,z,value"));
    let fields = fs::read_to_string(dir.path().join("out/field_samples.csv")).unwrap();
    assert!(fields.lines().count() > 1);
}

#[test]
fn couette_reports_vorticity_constant_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = divcol(dir.path(), &["--set", "case=couette", "--set", "mesh=4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["case"], "couette");
    let e = r["omega_const_error"].as_f64().unwrap();
    assert!(e.is_finite() && e >= 0.0);
    assert!(r["runs"][0]["errors"]["pressure"]["l2"].as_f64().unwrap() < 1e-12);
}

#[test]
fn reports_are_deterministic_apart_from_the_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let reports: Vec<Value> = (0..2)
        .map(|_| {
            let out = divcol(dir.path(), &["--set", "case=cavity2d", "--set", "mesh=4", "--set", "re=10"]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            let mut r = report(dir.path());
            r.as_object_mut().unwrap().remove("timestamp");
            r
        })
        .collect();
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn overrides_take_precedence_over_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("case.cfg");
    fs::write(&file, "# vortex\ncase = vortex2d\nmesh = 8\nkprime = 2\n").unwrap();
    let out = divcol(dir.path(), &["--config", file.to_str().unwrap(), "--set", "mesh=4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["runs"][0]["mesh"], 4);
    assert_eq!(r["config"]["kprime"], 2);
}
