use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn epiconj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epiconj")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_exit_codes() {
    for (file, code) in [("annulus.json", 0), ("killing.json", 0), ("divergent.json", 1), ("malformed.json", 2)] {
        let out = epiconj(&["validate", "--field", data(file).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(code), "{file}: {}", stdout(&out));
    }
    let out = epiconj(&["validate", "--field", data("divergent.json").to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("divergence"));
    let out = epiconj(&["validate", "--field", data("malformed.json").to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("column"));
}

#[test]
fn bad_arguments_are_input_errors() {
    let field = data("killing.json");
    let f = field.to_str().unwrap();
    assert_eq!(epiconj(&["first", "--field", f, "--horizon", "-1"]).status.code(), Some(2));
    assert_eq!(epiconj(&["first", "--field", f, "--points", "1,2"]).status.code(), Some(2));
    assert_eq!(epiconj(&["first", "--field", "/nonexistent.json"]).status.code(), Some(2));
    let annulus = data("annulus.json");
    assert_eq!(epiconj(&["first", "--field", annulus.to_str().unwrap(), "--points", "0,0,5"]).status.code(), Some(2));
}

#[test]
fn first_reports_two_pi_for_killing_and_none_without_vorticity() {
    let out = epiconj(&["first", "--field", data("killing.json").to_str().unwrap(), "--points", "0.1,0.2,0.3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("tau = 6.28318530"), "{}", stdout(&out));
    let out = epiconj(&["first", "--field", data("zero_vorticity.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("none"));
}

#[test]
fn scan_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let field = data("killing.json");
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = epiconj(&[
            "scan", "--field", field.to_str().unwrap(), "--points", "0.3,-0.2,0.5",
            "--grid-level", "2", "--horizon", "20", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert!(stdout(&o).contains("[6.2832, H]"), "{}", stdout(&o));
        out.join("point_000")
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["surface.csv", "intervals.json", "directions.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("surface.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("theta,phi,xi1,xi2,xi3,branch_id,t"));
    let iv: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("intervals.json")).unwrap()).unwrap();
    assert_eq!(iv["reaches_horizon"], serde_json::Value::Bool(true));
    assert_eq!(iv["intervals"].as_array().unwrap().len(), 1);
}

#[test]
fn scan_without_vorticity_is_empty() {
    let out = epiconj(&["scan", "--field", data("zero_vorticity.json").to_str().unwrap(), "--grid-level", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("(none)"));
}

#[test]
fn right_check_passes_on_shear() {
    let out = epiconj(&["right-check", "--field", data("shear.json").to_str().unwrap(), "--samples", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn examples_subset_passes() {
    let out = epiconj(&["examples", "--only", "1,7"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert_eq!(stdout(&out).lines().filter(|l| l.starts_with("PASS")).count(), 2);
}
