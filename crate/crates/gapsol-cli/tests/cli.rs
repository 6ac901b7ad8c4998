//! End-to-end tests of the `gapsol` binary: exit codes, reports and the
//! on-disk certificate round trip.

use std::path::Path;
use std::process::{Command, Output};

fn gapsol(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapsol")).args(args).arg("--dir").arg(dir).output().expect("run gapsol")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn edit_json(path: &Path, f: impl FnOnce(&mut serde_json::Value)) {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    f(&mut v);
    std::fs::write(path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
}

#[test]
fn bundle_stage_verifies_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let o = gapsol(dir.path(), &["prove-bundle"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("bundle:   proved"), "{}", stdout(&o));

    let o = gapsol(dir.path(), &["verify-certificate"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("VERIFIED (stored stages only"), "{}", stdout(&o));

    let o = gapsol(dir.path(), &["refine", "--stage", "bundle"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("converged: true"), "{out}");
    let last = out.lines().rfind(|l| l.starts_with("iteration")).expect("iteration lines");
    let r: f64 = last.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(r <= 1e-13, "{out}");

    // A tampered bound must be reported as a mismatch.
    let proof = dir.path().join("proof.json");
    let pristine = std::fs::read_to_string(&proof).unwrap();
    edit_json(&proof, |v| v["bundle"]["Y_hex"] = "0x1p-40".into());
    let o = gapsol(dir.path(), &["verify-certificate"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).contains("MISMATCH"), "{}", stdout(&o));
    assert!(stdout(&o).contains("VERIFICATION FAILED"), "{}", stdout(&o));

    // So must a configuration that no longer matches the stored hash.
    std::fs::write(&proof, pristine).unwrap();
    edit_json(&dir.path().join("config.json"), |v| v["a"] = "1.1".into());
    let o = gapsol(dir.path(), &["verify-certificate"]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
    assert!(stdout(&o).contains("MISMATCH"), "{}", stdout(&o));
}

#[test]
fn too_small_fourier_truncation_aborts_bundle_with_hint() {
    let dir = tempfile::tempdir().unwrap();
    let o = gapsol(dir.path(), &["prove-bundle", "--m-f", "4"]);
    assert_eq!(code(&o), 1, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("raise M_F"), "{}", stdout(&o));
    assert!(!dir.path().join("bundle_candidate.json").exists());
}

#[test]
fn starved_manifold_truncation_reports_z1_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = gapsol(dir.path(), &["prove-bundle", "--m-f", "6", "--n-t", "6"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    let o = gapsol(dir.path(), &["prove-manifold", "--m-f", "6", "--n-t", "6"]);
    assert_eq!(code(&o), 1, "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("Z1"), "{out}");
    assert!(out.contains("raise N_T or M_F"), "{out}");
}

#[test]
fn manifold_stage_without_bundle_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gapsol(dir.path(), &["prove-manifold"]);
    assert_eq!(code(&o), 2, "{}{}", stdout(&o), stderr(&o));
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("my.json");
    std::fs::write(&cfg, r#"{"a": "1.1025", "bogus": 3}"#).unwrap();
    let o = gapsol(dir.path(), &["prove-bundle", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn full_proof_samples_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let o = gapsol(dir.path(), &["prove"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "PROVED"), "{}", stdout(&o));
    assert!(dir.path().join("profile.csv").exists());

    let o = gapsol(dir.path(), &["sample", "--csv", "-", "--xmax", "20", "--points", "2000"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut rdr = csv::Reader::from_reader(o.stdout.as_slice());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header[0], "x");
    let rows: Vec<Vec<f64>> = rdr.records().map(|r| r.unwrap().iter().take(3).map(|f| f.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2000);
    assert_eq!(rows[0][0], -20.0);
    assert_eq!(rows[1999][0], 20.0);
    // Error bounds are finite and do not grow towards the right end.
    let right: Vec<f64> = rows.iter().filter(|r| r[0] > 15.0).map(|r| r[2]).collect();
    assert!(right.iter().all(|e| e.is_finite() && *e > 0.0));
    assert!(right.windows(2).all(|w| w[1] <= w[0]), "tail error bound not monotone");

    let o = gapsol(dir.path(), &["verify-certificate"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).lines().any(|l| l == "VERIFIED"), "{}", stdout(&o));
}
