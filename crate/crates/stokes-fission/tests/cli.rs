//! End-to-end tests of the command line interface: exit codes, report shape
//! against the published schema, determinism, and diagram output.

use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stokes-fission"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

/// Checks that every key listed under `required` in a schema node is present.
fn check_required(value: &serde_json::Value, schema_node: &serde_json::Value) {
    for key in schema_node["required"].as_array().expect("required list") {
        let key = key.as_str().unwrap();
        assert!(
            !value.get(key).is_none(),
            "missing required report field {:?}",
            key
        );
    }
}

fn schema() -> serde_json::Value {
    serde_json::from_str(include_str!("../docs/report-schema.json")).unwrap()
}

#[test]
fn preset_listing_and_dump() {
    let out = run(&["preset", "--list"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["airy", "cuberoot", "p1h-n2-k3"] {
        assert!(text.contains(name));
    }
    let out = run(&["preset", "airy"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["entries"][0]["mult"], 1);
}

#[test]
fn analyze_airy_matches_the_expected_counts() {
    let out = run(&["analyze", "--preset", "airy"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["cover_degree"], 3);
    assert_eq!(v["directions"].as_array().unwrap().len(), 3);
    assert_eq!(v["descent"], true);
    assert_eq!(v["untwist"]["ok"], true);
    // Spaced preset names are accepted.
    let out = run(&["analyze", "--preset", "p1h n=2 k=3"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["directions"].as_array().unwrap().len(), 3);
    assert_eq!(v["directions"][0]["dim"], 4);
}

#[test]
fn analyze_report_validates_against_the_schema() {
    let schema = schema();
    let analyze_schema = &schema["oneOf"][0];
    let out = run(&["analyze", "--preset", "cuberoot"]);
    let v = stdout_json(&out);
    check_required(&v, analyze_schema);
    for d in v["directions"].as_array().unwrap() {
        check_required(d, &schema["definitions"]["direction"]);
    }
    for c in v["circles"].as_array().unwrap() {
        check_required(c, &schema["definitions"]["circle"]);
    }
    check_required(&v["untwist"], &schema["definitions"]["untwist"]);
}

#[test]
fn input_errors_exit_with_code_two() {
    // No input at all.
    let out = run(&["analyze"]);
    assert_eq!(out.status.code(), Some(2));
    // Unknown preset.
    let out = run(&["analyze", "--preset", "nonesuch"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
    // Malformed JSON file with a diagnostic.
    let dir = std::env::temp_dir().join("stokes-fission-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("broken.json");
    std::fs::write(&path, "{\"entries\": [{\"circle\": }]}").unwrap();
    let out = run(&["analyze", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("parse error"), "stderr: {}", err);
    assert!(err.contains("line"), "diagnostics carry a position: {}", err);
    // Unknown verify preset.
    let out = run(&["verify", "--preset", "nonesuch"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diagram_formats() {
    let out = run(&["diagram", "--preset", "airy"]);
    assert!(out.status.success());
    let svg = String::from_utf8_lossy(&out.stdout);
    assert!(svg.starts_with("<?xml"));
    assert!(svg.contains("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<circle").count(), 1 + 3); // base circle + 3 apples
    assert_eq!(svg.matches("<line").count(), 3); // 3 singular rays
    let out = run(&["diagram", "--preset", "cuberoot", "--format", "json"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["rays_turns"].as_array().unwrap().len(), 2);
    let out = run(&["diagram", "--preset", "airy", "--format", "gif"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_passes_and_validates_schema() {
    let out = run(&["verify", "--preset", "p1h-n1-k1", "--seeds", "10", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let schema = schema();
    check_required(&v, &schema["oneOf"][1]);
    for r in v["reports"].as_array().unwrap() {
        check_required(r, &schema["definitions"]["axiom_report"]);
    }
    assert_eq!(v["pass"], true);
    assert_eq!(v["reports"][0]["qh_tolerance"], 1e-6);
    assert_eq!(v["reports"][0]["qh3_kernel_max"], 0);
}

#[test]
fn verify_tolerance_only_loosens_and_is_echoed() {
    let out = run(&["verify", "--preset", "p1h-n1-k1", "--seeds", "5", "--tol", "1e-3"]);
    let v = stdout_json(&out);
    assert_eq!(v["reports"][0]["qh_tolerance"], 1e-3);
    // Tightening below the built-in threshold is ignored.
    let out = run(&["verify", "--preset", "p1h-n1-k1", "--seeds", "5", "--tol", "1e-12"]);
    let v = stdout_json(&out);
    assert_eq!(v["reports"][0]["qh_tolerance"], 1e-6);
}

#[test]
fn verify_corrupt_sign_is_a_failing_negative_control() {
    let out = run(&[
        "verify",
        "--preset",
        "p1h-n1-k1",
        "--seeds",
        "5",
        "--corrupt-sign",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["pass"], false);
    assert!(v["negative_control"].as_str().unwrap().contains("expected"));
}

#[test]
fn verify_output_is_deterministic() {
    let a = run(&["verify", "--preset", "airy", "--seeds", "8"]);
    let b = run(&["verify", "--preset", "airy", "--seeds", "8"]);
    assert_eq!(a.stdout, b.stdout);
    let c = run(&["analyze", "--preset", "airy"]);
    let d = run(&["analyze", "--preset", "airy"]);
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn fuse_subcommand_verifies_fused_spaces() {
    let out = run(&[
        "fuse",
        "--preset",
        "p1h-n1-k1",
        "--with",
        "airy",
        "--seeds",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["pass"], true);
    let out = run(&["fuse", "--double", "id,id", "--rank", "2", "--seeds", "5"]);
    assert_eq!(out.status.code(), Some(0));
    // Mismatched ranks are an input error.
    let out = run(&["fuse", "--preset", "p1h-n1-k1", "--with", "p1h-n2-k1", "--seeds", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_files_are_written() {
    let dir = std::env::temp_dir().join("stokes-fission-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("airy.svg");
    let out = run(&["diagram", "--preset", "airy", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let svg = std::fs::read_to_string(&path).unwrap();
    assert!(svg.contains("</svg>"));
}

#[test]
fn numeric_mode_class_file_round_trip() {
    // A numeric-mode class supplied as a file flows through analyze and
    // verify; exact angles are replaced by floats in the report.
    let dir = std::env::temp_dir().join("stokes-fission-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("numeric.json");
    std::fs::write(
        &path,
        r#"{
  "entries": [
    { "circle": { "terms": [ { "exp": "3/2", "coeff": { "re": 1.25, "im": 0.75 } } ] }, "mult": 1 }
  ],
  "twist": "id"
}"#,
    )
    .unwrap();
    let out = run(&["analyze", "--input", path.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["rank"], 2);
    assert_eq!(v["circles"][0]["exact"], false);
    assert_eq!(v["directions"].as_array().unwrap().len(), 3);
    assert!(v["directions"][0]["enumeration_turns"].is_number());
    assert_eq!(v["untwist"]["ok"], true);
    let out = run(&["verify", "--input", path.to_str().unwrap(), "--seeds", "5"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn class_without_singular_directions_is_an_input_error_for_verify() {
    let dir = std::env::temp_dir().join("stokes-fission-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("tame.json");
    std::fs::write(
        &path,
        r#"{ "entries": [ { "circle": { "terms": [] }, "mult": 2 } ], "twist": "id" }"#,
    )
    .unwrap();
    // Analysis still works (a tame class has no rays).
    let out = run(&["analyze", "--input", path.to_str().unwrap()]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert_eq!(v["directions"].as_array().unwrap().len(), 0);
    // There is no fission model to verify.
    let out = run(&["verify", "--input", path.to_str().unwrap(), "--seeds", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no singular directions"));
}
