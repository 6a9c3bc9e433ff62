//! Black-box tests of the kms-hodge binary: exit codes, report shapes,
//! and determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kms-hodge"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn charnum_bundle_fixture_par_ch2() {
    let out = run(&["charnum", "-i", fixture("bundle.json").to_str().unwrap()]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    assert_eq!(v["reports"][0]["par_ch2"], "1/6");
    assert_eq!(v["reports"][0]["kind"], "bundle");
}

#[test]
fn charnum_localsys_fixture_matches_bundle() {
    let b = json_stdout(&run(&[
        "charnum",
        "-i",
        fixture("bundle.json").to_str().unwrap(),
    ]));
    let l = json_stdout(&run(&[
        "charnum",
        "-i",
        fixture("localsys.json").to_str().unwrap(),
    ]));
    for key in ["par_deg", "par_ch2", "c1_squared", "c1_coeffs"] {
        assert_eq!(b["reports"][0][key], l["reports"][0][key], "{key}");
    }
}

#[test]
fn charnum_missing_file_is_validation_error() {
    let out = run(&["charnum", "-i", "/nonexistent/x.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn charnum_rejects_csv_format() {
    let out = run(&[
        "charnum",
        "-i",
        fixture("bundle.json").to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn corr_transport_matches_bundle_fixture() {
    let out = run(&["corr", "-i", fixture("localsys.json").to_str().unwrap()]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    assert_eq!(v["char_match"], true);
    let expected: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(fixture("bundle.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(v["bundle"], expected);
}

#[test]
fn corr_monodromy_fixture() {
    let out = run(&["corr", "-i", fixture("monodromy.json").to_str().unwrap()]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    assert_eq!(v["kind"], "monodromy");
    // -1 monodromy: alpha = 1/2, weight b - Re alpha + n in (0, 1]
    assert_eq!(v["reports"][1]["eigen"][0]["alpha"]["re"], 0.5);
    assert_eq!(v["reports"][1]["weights"][0], 1.0);
}

#[test]
fn perturb_reports_lattice_weights() {
    let out = run(&[
        "perturb",
        "-i",
        fixture("bundle.json").to_str().unwrap(),
        "--m",
        "100",
    ]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    assert_eq!(v["divisors"][0]["gap_ok"], true);
    assert_eq!(v["divisors"][0]["new_weights"][0]["weight"], "-1/2");
}

#[test]
fn flow_smoke_and_guard_exit_codes() {
    let out = run(&["flow", "-i", fixture("flow.json").to_str().unwrap()]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    assert_eq!(v["aborted"], false);
    assert!(v["max_det_residual"].as_f64().unwrap() < 1e-8);

    // a huge step violates the dt * sup|LambdaG| guard: validation error
    let out = run(&[
        "flow",
        "-i",
        fixture("flow.json").to_str().unwrap(),
        "--dt",
        "1.0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("guard"));
}

#[test]
fn flow_csv_trace() {
    let out = run(&[
        "flow",
        "-i",
        fixture("flow.json").to_str().unwrap(),
        "--steps",
        "5",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,det_residual,donaldson,lambda_g_perp_l2"
    );
    assert_eq!(lines.count(), 5);
}

#[test]
fn scan_deterministic_for_fixed_seed() {
    let args = ["scan", "--samples", "20000", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn scan_uniform_bound_table() {
    let out = run(&[
        "scan",
        "--samples",
        "1000",
        "--eps",
        "0.5,0.1",
        "--grid",
        "48x48",
    ]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    assert_eq!(v["uniform_bounds"].as_array().unwrap().len(), 2);
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn verify_default_seed_passes() {
    let out = run(&["verify"]);
    assert!(out.status.success());
    let v = json_stdout(&out);
    assert_eq!(v["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn verify_respects_thread_cap() {
    let out = Command::new(env!("CARGO_BIN_EXE_kms-hodge"))
        .args(["verify"])
        .env("KMS_HODGE_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn output_file_and_text_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.txt");
    let out = run(&[
        "charnum",
        "-i",
        fixture("bundle.json").to_str().unwrap(),
        "--format",
        "text",
        "-o",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("par_ch2 = \"1/6\""));
}

#[test]
fn malformed_rational_is_field_path_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(fixture("bundle.json")).unwrap(),
    )
    .unwrap();
    doc["divisor_spectra"]["D1"][0]["a"] = serde_json::json!("not-a-rational");
    std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = run(&["charnum", "-i", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("divisor_spectra.D1[0].a"), "{err}");
}
