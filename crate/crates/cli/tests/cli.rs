//! End-to-end checks of the `coverlab` binary: exit codes, listing,
//! manifest verification.

use std::path::Path;
use std::process::Command;

fn coverlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coverlab"))
}

#[test]
fn list_contains_required_scenarios_and_is_stable() {
    let out1 = coverlab().arg("list").output().unwrap();
    assert!(out1.status.success());
    let text = String::from_utf8(out1.stdout).unwrap();
    for name in [
        "shrinking-balls",
        "rectangles",
        "two-cubes",
        "fat-cantor",
        "packing-saturation",
        "gauge-ball",
        "gamma-suite",
    ] {
        assert!(text.contains(name), "missing scenario {name}");
    }
    assert!(text.lines().count() >= 7);
    let out2 = coverlab().arg("list").output().unwrap();
    assert_eq!(text, String::from_utf8(out2.stdout).unwrap());
}

#[test]
fn list_json_mode_parses() {
    let out = coverlab().args(["list", "--json"]).output().unwrap();
    assert!(out.status.success());
    let arr: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(arr.as_array().unwrap().len() >= 7);
}

#[test]
fn unknown_scenario_is_usage_error() {
    let out = coverlab().args(["reproduce", "no-such-scenario"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("shrinking-balls"), "should list known scenarios");
}

#[test]
fn reproduce_writes_reports_and_verify_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let out = coverlab()
        .args([
            "reproduce",
            "critical-exponent",
            "--alpha",
            "2",
            "--json",
            "--out",
        ])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["passed"], serde_json::json!(true));
    let run_dir = tmp.path().join("critical-exponent");
    for file in ["exponents.csv", "summary.json", "config.json", "manifest.json", "run.log"] {
        assert!(run_dir.join(file).exists(), "missing {file}");
    }
    // verify passes on the untouched run
    let ok = coverlab().arg("verify").arg(&run_dir).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    // tampering with a table is detected
    let csv = run_dir.join("exponents.csv");
    let mut contents = std::fs::read_to_string(&csv).unwrap();
    contents.push_str("tampered row\n");
    std::fs::write(&csv, contents).unwrap();
    let bad = coverlab().arg("verify").arg(&run_dir).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8(bad.stderr).unwrap().contains("exponents.csv"));
}

#[test]
fn failing_threshold_gives_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("cfg.json");
    std::fs::write(
        &config,
        r#"{"scenario":"critical-exponent","alphas":[2.0],"n_max":100000,"tolerance":1e-12}"#,
    )
    .unwrap();
    let out = coverlab()
        .args(["reproduce", "critical-exponent", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn resource_cap_gives_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("cfg.json");
    // level 13 exceeds the d=2 resolution cap
    std::fs::write(
        &config,
        r#"{"scenario":"rectangles","side_exponents":[1],"s_values":[0.5],"level":13,"factor_tolerance":4.0,"max_piece_level":1}"#,
    )
    .unwrap();
    let out = coverlab()
        .args(["reproduce", "rectangles", "--config"])
        .arg(&config)
        .args(["--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn rerun_with_same_config_has_identical_hash() {
    let tmp_a = tempfile::tempdir().unwrap();
    let tmp_b = tempfile::tempdir().unwrap();
    for tmp in [&tmp_a, &tmp_b] {
        let out = coverlab()
            .args(["reproduce", "critical-exponent", "--alpha", "3", "--out"])
            .arg(tmp.path())
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    let read = |p: &Path| -> serde_json::Value {
        serde_json::from_str(
            &std::fs::read_to_string(p.join("critical-exponent/manifest.json")).unwrap(),
        )
        .unwrap()
    };
    let (ma, mb) = (read(tmp_a.path()), read(tmp_b.path()));
    assert_eq!(ma["config_sha256"], mb["config_sha256"]);
    assert_eq!(ma["files"], mb["files"]);
}
