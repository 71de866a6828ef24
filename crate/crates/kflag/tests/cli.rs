//! Golden-output and exit-code tests for the command-line interface. Reports
//! must be byte-stable across reruns (timing field aside), so every format
//! here is pinned exactly.

use std::path::PathBuf;
use std::process::Command;

const SL2: &str = r#"{"stages":[{"family":"A","vars":2}]}"#;
const TWO: &str =
    r#"{"stages":[{"family":"A","vars":2},{"family":"A","vars":2}],"maps":{"2":{"1":[[2,-1],[1,1]]}}}"#;
const SL7: &str = r#"{"stages":[{"family":"A","vars":7}]}"#;

fn tower_file(name: &str, json: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("kflag-cli-{}-{}.json", std::process::id(), name));
    std::fs::write(&path, json).expect("write tower file");
    path
}

fn run_with_env(args: &[&str], env: &[(&str, &str)]) -> (i32, String, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kflag"));
    cmd.args(args).env_remove("KFLAG_RESOURCE_CAP");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn run(args: &[&str]) -> (i32, String, String) {
    run_with_env(args, &[])
}

/// Parses a verify report and drops the timing field.
fn report_without_timing(stdout: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(stdout.trim()).expect("report is JSON");
    let obj = v.as_object_mut().expect("report is an object");
    assert!(obj.remove("elapsed_ms").is_some(), "elapsed_ms present");
    v
}

#[test]
fn present_output_is_pinned() {
    let path = tower_file("present", SL2);
    let p = path.to_str().unwrap();
    let (code, stdout, _) = run(&["present", p]);
    assert_eq!(code, 0);
    assert_eq!(
        stdout,
        "mode: ordinary\n\
         generators:\n  y[1,1]\n  y[1,2]\n\
         relations:\n  y[1,1]+y[1,2] - 2\n  y[1,1]*y[1,2] - 1\n"
    );
    let (code, stdout, _) = run(&["present", p, "--json"]);
    assert_eq!(code, 0);
    assert_eq!(
        stdout.trim(),
        r#"{"generators":["y[1,1]","y[1,2]"],"mode":"ordinary","relations":["y[1,1]+y[1,2] - 2","y[1,1]*y[1,2] - 1"]}"#
    );
    std::fs::remove_file(&path).ok();
}

#[test]
fn verify_report_is_pinned_for_each_backend() {
    let path = tower_file("verify", TWO);
    let p = path.to_str().unwrap();
    // default: rational cross-check plus the exact engine where it applies
    let (code, stdout, _) = run(&["verify", p, "--json"]);
    assert_eq!(code, 0);
    let full: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    let hash = full["tower"].as_str().expect("tower hash");
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(
        report_without_timing(&stdout),
        serde_json::json!({
            "tower": hash, "expected": 4, "computed": 4,
            "pass": true, "basis_size": 8
        })
    );
    // engine only: the basis size is the generator count
    let (code, stdout, _) = run(&["verify", "--typeA", p, "--json"]);
    assert_eq!(code, 0);
    let engine_report = report_without_timing(&stdout);
    assert_eq!(engine_report["basis_size"], serde_json::json!(4));
    assert_eq!(engine_report["computed"], serde_json::json!(4));
    assert_eq!(engine_report["tower"], serde_json::json!(hash));
    // rational backend only: the basis size counts reduced rows
    let (code, stdout, _) = run(&["verify", "--groebner", p, "--json"]);
    assert_eq!(code, 0);
    assert_eq!(report_without_timing(&stdout)["basis_size"], serde_json::json!(8));
    // human rendering
    let (code, stdout, _) = run(&["verify", p]);
    assert_eq!(code, 0);
    assert_eq!(
        stdout,
        format!("tower: {hash}\nexpected: 4\ncomputed: 4\nbasis size: 8\npass: true\n")
    );
    std::fs::remove_file(&path).ok();
}

#[test]
fn normal_form_output_is_pinned() {
    let path = tower_file("nf", SL2);
    let p = path.to_str().unwrap();
    let (code, stdout, _) = run(&["nf", p, "y[1,2]^2"]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "{\"1\": \"3\", \"y[1,1]\": \"-2\"}\n");
    let (code, stdout, _) = run(&["nf", p, "y[1,2]^2", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.trim(), r#"{"1":"3","y[1,1]":"-2"}"#);
    std::fs::remove_file(&path).ok();
}

#[test]
fn mult_table_output_is_pinned() {
    let path = tower_file("mult", SL2);
    let p = path.to_str().unwrap();
    let (code, stdout, _) = run(&["mult", p, "--json"]);
    assert_eq!(code, 0);
    assert_eq!(
        stdout.trim(),
        r#"{"basis":["1","y[1,1]"],"table":[[{"1":"1"},{"y[1,1]":"1"}],[{"y[1,1]":"1"},{"1":"-1","y[1,1]":"2"}]]}"#
    );
    let (code, stdout, _) = run(&["mult", p]);
    assert_eq!(code, 0);
    assert_eq!(
        stdout,
        "basis: 1, y[1,1]\n\
         1 * 1 = 1\n\
         1 * y[1,1] = y[1,1]\n\
         y[1,1] * 1 = y[1,1]\n\
         y[1,1] * y[1,1] = 2*y[1,1] - 1\n"
    );
    std::fs::remove_file(&path).ok();
}

#[test]
fn weyl_stage_report_is_pinned() {
    let (code, stdout, _) = run(&["weyl", "A", "2", "--json"]);
    assert_eq!(code, 0);
    assert_eq!(
        stdout.trim(),
        r#"{"blocks":[1,1],"coset_rank":2,"family":"A","invariant_generators":["y[1,1]+y[1,2]","y[1,1]*y[1,2]"],"vars":2,"weyl_order":2}"#
    );
    let (code, stdout, _) = run(&["weyl", "A", "2"]);
    assert_eq!(code, 0);
    assert_eq!(
        stdout,
        "family: A\nvars: 2\nblocks: 1,1\nweyl order: 2\ncoset rank: 2\n\
         invariant generators:\n  y[1,1]+y[1,2]\n  y[1,1]*y[1,2]\n"
    );
}

#[test]
fn reruns_are_deterministic() {
    let path = tower_file("determinism", TWO);
    let p = path.to_str().unwrap();
    for args in [
        vec!["present", p, "--json"],
        vec!["present", p],
        vec!["nf", p, "y[2,1]*y[1,1]^-1 + 3", "--json"],
        vec!["mult", p, "--json"],
        vec!["weyl", "B_spin", "2", "--json"],
    ] {
        let first = run(&args);
        let second = run(&args);
        assert_eq!(first, second, "{args:?} is not deterministic");
    }
    let (_, out1, _) = run(&["verify", p, "--json"]);
    let (_, out2, _) = run(&["verify", p, "--json"]);
    assert_eq!(report_without_timing(&out1), report_without_timing(&out2));
    std::fs::remove_file(&path).ok();
}

#[test]
fn failures_use_documented_exit_codes_and_channels() {
    let sl2 = tower_file("codes-sl2", SL2);
    let p = sl2.to_str().unwrap();
    // input problems: exit 1
    let bad = tower_file("codes-bad", r#"{"stages":[]}"#);
    let (code, stdout, stderr) = run(&["verify", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stdout.is_empty());
    assert!(stderr.starts_with("error: validation error:"), "{stderr}");
    let (code, _, stderr) = run(&["verify", "/nonexistent/tower.json"]);
    assert_eq!(code, 1);
    assert!(stderr.starts_with("error: io error:"), "{stderr}");
    // JSON mode moves the failure to stderr as a structured object
    let (code, stdout, stderr) = run(&["nf", p, "y[1,1]+", "--json"]);
    assert_eq!(code, 1);
    assert!(stdout.is_empty());
    let err: serde_json::Value = serde_json::from_str(stderr.trim()).expect("error is JSON");
    assert_eq!(err["error"]["class"], serde_json::json!("input"));
    assert_eq!(err["error"]["code"], serde_json::json!(1));
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .starts_with("parse error at 1:8"));
    // resource ceilings: exit 2
    let (code, _, stderr) = run_with_env(&["verify", p], &[("KFLAG_RESOURCE_CAP", "1")]);
    assert_eq!(code, 2);
    assert!(stderr.starts_with("error: resource cap exceeded:"), "{stderr}");
    let sl7 = tower_file("codes-sl7", SL7);
    let (code, _, stderr) = run(&["mult", sl7.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("exceeds the structure-constant cap"), "{stderr}");
    // a passing verify still exits 0
    assert_eq!(run(&["verify", p]).0, 0);
    for f in [sl2, bad, sl7] {
        std::fs::remove_file(&f).ok();
    }
}

#[test]
fn output_flag_writes_the_report_file() {
    let tower = tower_file("outflag", SL2);
    let out_path = std::env::temp_dir().join(format!(
        "kflag-cli-{}-outflag-report.json",
        std::process::id()
    ));
    let (code, stdout, stderr) = run(&[
        "verify",
        tower.to_str().unwrap(),
        "--json",
        "-o",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty(), "report must go to the file only");
    assert!(stderr.is_empty());
    let written = std::fs::read_to_string(&out_path).expect("report file");
    assert!(written.ends_with('\n'));
    let v: serde_json::Value = serde_json::from_str(written.trim()).unwrap();
    assert_eq!(v["computed"], serde_json::json!(2));
    assert_eq!(v["pass"], serde_json::json!(true));
    std::fs::remove_file(&tower).ok();
    std::fs::remove_file(&out_path).ok();
}
