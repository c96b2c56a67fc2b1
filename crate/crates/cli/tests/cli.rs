use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../protocols")
        .join(name)
}

fn photon_tn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photon-tn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = photon_tn(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn path(name: &str) -> String {
    shipped(name).display().to_string()
}

fn amplitude(r: &Value, key: &str, basis: &str) -> (f64, f64) {
    let entry = r["payload"][key]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["basis"] == basis)
        .unwrap();
    (
        entry["amplitude"][0].as_f64().unwrap(),
        entry["amplitude"][1].as_f64().unwrap(),
    )
}

fn check_value(r: &Value, name: &str) -> f64 {
    r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap()["value"]
        .as_f64()
        .unwrap()
}

#[test]
fn run_w_protocol() {
    let r = report(&["run", &path("w_state.json")]);
    let eta = -2.0 * 2f64.sqrt() / 3.0;
    for (basis, want) in [
        ("001", eta),
        ("010", eta / 3.0),
        ("100", eta / 9.0),
        ("000", 0.0),
        ("111", 0.0),
    ] {
        let (re, im) = amplitude(&r, "unnormalized", basis);
        assert!(
            (re - want).abs() <= 1e-12 && im.abs() <= 1e-12,
            "{basis}: {re}"
        );
    }
    assert_eq!(r["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn run_ghz_protocol() {
    let r = report(&["run", &path("ghz_state.json")]);
    let p = r["payload"]["success_probability"].as_f64().unwrap();
    assert!((p - 0.5).abs() <= 1e-12);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((amplitude(&r, "normalized", "000").0 - h).abs() <= 1e-12);
    assert!((amplitude(&r, "normalized", "111").0 - h).abs() <= 1e-12);
}

#[test]
fn malformed_protocol_is_diagnosed() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        "{\n  \"model\": {\"builder\": \"cz\"},\n  \"photons\": [\n",
    )
    .unwrap();
    let out = photon_tn(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "{err}");

    std::fs::write(
        &bad,
        r#"{"model": {"builder": "cz"}, "photons": [{"amplitudes": [[1,0],[0,0]]}],
            "steps": [{"init": [[1,0],[0,0]]}, {"scatter": 2}, {"project": [[1,0],[0,0]]}]}"#,
    )
    .unwrap();
    let out = photon_tn(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step 1"));
}

#[test]
fn build_mps_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.mps.json");
    let r = report(&[
        "build",
        &path("w_state.json"),
        "--mps",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(check_value(&r, "oracle_deviation") <= 1e-12);
    let m = photon_tn::mps::load_mps(&out).unwrap();
    assert_eq!(m.len(), 3);
    assert_eq!(m.bond_dims(), vec![2, 2, 2, 2]);
}

#[test]
fn build_rejects_rescattering_as_mps() {
    let out = photon_tn(&["build", &path("two_triangle.json"), "--mps"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PEPS"));
}

#[test]
fn build_two_triangle_peps() {
    let r = report(&[
        "build",
        &path("two_triangle.json"),
        "--peps",
        "--graph",
        &path("two_triangle.graph"),
    ]);
    assert!(check_value(&r, "oracle_deviation") <= 1e-12);
    assert_eq!(r["payload"]["bond_axes"], serde_json::json!([3, 2, 3, 2]));
    let peps = photon_tn::peps::PepsDoc::build(
        &serde_json::from_value(r["payload"]["peps"].clone()).unwrap(),
    )
    .unwrap();
    assert_eq!(peps.graph().edge_count(), 5);
}

#[test]
fn mismatched_graph_names_event() {
    let out = photon_tn(&[
        "build",
        &path("two_triangle.json"),
        "--peps",
        "--graph",
        &path("c4.graph"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("scatter event 6"), "{err}");
}

#[test]
fn schedule_shipped_graphs() {
    let trails = |g: &str| report(&["schedule", "--graph", &path(g)])["payload"]["trails"].clone();
    assert_eq!(
        trails("two_triangle.graph"),
        serde_json::json!([[1, 2, 3, 4, 1, 3]])
    );
    let c4 = trails("c4.graph");
    assert_eq!(c4.as_array().unwrap().len(), 1);
    assert_eq!(c4[0][0], c4[0][4]);
    assert_eq!(trails("star.graph").as_array().unwrap().len(), 2);
    assert_eq!(trails("path3.graph"), serde_json::json!([[1, 2, 3]]));
}

#[test]
fn schedule_output_is_a_runnable_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.json");
    report(&[
        "schedule",
        "--graph",
        &path("star.graph"),
        "--out",
        out.to_str().unwrap(),
    ]);
    let p = photon_tn::protocol::load_protocol(&out, None)
        .unwrap()
        .protocol;
    assert_eq!(p.trails().len(), 2);
    report(&[
        "build",
        out.to_str().unwrap(),
        "--peps",
        "--graph",
        &path("star.graph"),
    ]);
}

#[test]
fn cluster_single_edge_matches_shipped_protocol() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let r = report(&[
        "cluster",
        "--graph",
        &path("cluster_edge.graph"),
        "--out",
        out.to_str().unwrap(),
    ]);
    for (basis, want) in [("00", 0.5), ("01", 0.5), ("10", 0.5), ("11", -0.5)] {
        assert!((amplitude(&r, "state", basis).0 - want).abs() <= 1e-12);
    }
    let shipped_text = std::fs::read_to_string(shipped("cluster_edge.json")).unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap(), shipped_text);
    let r = report(&["run", &path("cluster_edge.json")]);
    assert!((r["payload"]["success_probability"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
}

#[test]
fn synthesize_shipped_mps() {
    let r = report(&["synthesize", &path("ghz_site.mps.json")]);
    assert!(check_value(&r, "round_trip_deviation") <= 1e-10);
    assert_eq!(r["payload"]["atom_dim"], 3);
    assert!((r["payload"]["fidelity"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
}

#[test]
fn verify_is_deterministic() {
    let a = report(&["verify", "--seed", "3", "--jobs", "2"]);
    let b = report(&["verify", "--seed", "3", "--jobs", "1"]);
    assert_eq!(a["pass"], true);
    let worst = |r: &Value| -> Vec<Value> {
        r["payload"]["suites"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| s["worst"].clone())
            .collect()
    };
    assert_eq!(worst(&a), worst(&b));
}

#[test]
fn tight_tolerance_fails_with_exit_one() {
    let out = photon_tn(&["build", &path("w_state.json"), "--mps", "--tolerance=-1"]);
    assert_eq!(out.status.code(), Some(1));
}
