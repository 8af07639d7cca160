use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name);
    root.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idbounds"))
        .args(args)
        .env_remove("IDBOUNDS_SEED")
        .output()
        .expect("spawn idbounds")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn number(v: &Value) -> f64 {
    match v {
        Value::Number(n) => n.as_f64().unwrap(),
        Value::String(s) if s == "inf" => f64::INFINITY,
        Value::String(s) if s == "-inf" => f64::NEG_INFINITY,
        other => panic!("not a number: {other}"),
    }
}

#[test]
fn capacity_of_bsc_file() {
    let v = json(&run(&["capacity", "--channel", &data("bsc01.json")]));
    let c = number(&v["report"]["capacity"]);
    assert!((c - 0.368_064_207_168_497_07).abs() <= 1e-8, "{c}");
    assert_eq!(v["manifest"]["units"], "nats");
    assert_eq!(v["manifest"]["inputs"][0]["builtin"], false);
}

#[test]
fn theorem1_bound_example() {
    let v = json(&run(&[
        "thm1",
        "--channel",
        &data("bsc01.json"),
        "--q",
        &data("uniform2.json"),
        "--gamma",
        "0",
        "--m",
        "10000",
    ]));
    assert!((number(&v["report"]["bound"]) - 0.09).abs() <= 1e-12, "{v}");
}

#[test]
fn invalid_channel_exits_two_and_names_the_row() {
    let out = run(&["capacity", "--channel", &data("bad_channel.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1 not stochastic"));
}

#[test]
fn usage_errors_exit_sixty_four() {
    assert_eq!(run(&["capacity", "--bogus"]).status.code(), Some(64));
    assert_eq!(run(&[]).status.code(), Some(64));
    assert_eq!(
        run(&["converse", "--channel", "bsc:0.1", "--eps", "0.1"]).status.code(),
        Some(64)
    );
}

#[test]
fn infinite_regime_is_a_validation_error() {
    let out = run(&[
        "converse",
        "--channel",
        "bsc:0.1",
        "--eps",
        "0.5",
        "--delta",
        "0.5",
        "--eta",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infinite"));
}

#[test]
fn builtins_and_files_agree() {
    let a = json(&run(&["dispersion", "--channel", "bsc:0.1"]));
    let b = json(&run(&["dispersion", "--channel", &data("bsc01.json")]));
    assert_eq!(a["report"]["v_min"], b["report"]["v_min"]);
    let v = number(&a["report"]["v_min"]);
    assert!((v - 0.434_501_625_892_529_5).abs() <= 1e-8);
}

#[test]
fn csv_rows_for_blocklength_sweep() {
    let out = run(&[
        "--format",
        "csv",
        "fbl",
        "--channel",
        "bsc:0.1",
        "--n",
        "100,200",
        "--eps",
        "0.1",
        "--side",
        "converse",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# manifest: {"));
    assert_eq!(lines[1], "n,bound,main_term,slack,seed");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("100,"));
}

#[test]
fn seeded_runs_are_reproducible() {
    let args = [
        "spectrum",
        "--channel",
        "bsc:0.1",
        "--input",
        "uniform:2",
        "--q",
        "uniform:2",
        "--n",
        "50",
        "--mode",
        "mc",
        "--samples",
        "20000",
        "--seed",
        "5",
    ];
    let a = json(&run(&args));
    let b = json(&run(&args));
    assert_eq!(a["report"], b["report"]);
    assert_eq!(a["manifest"]["seeds"][0], 5);
}

#[test]
fn seed_defaults_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_idbounds"))
        .args(["lemma1", "--sweep", "20"])
        .env("IDBOUNDS_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(json(&out)["manifest"]["seeds"][0], 11);
}

#[test]
fn reports_verify_against_their_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = run(&[
        "fbl",
        "--channel",
        "bsc:0.1",
        "--n",
        "500",
        "--eps",
        "0.4",
        "--side",
        "achievability",
        "--mode",
        "mc",
        "--samples",
        "50000",
        "--seed",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::write(&path, &out.stdout).unwrap();
    let v = json(&run(&["verify", "--report", path.to_str().unwrap()]));
    assert_eq!(v["report_matches"], true);

    // A tampered value no longer reproduces.
    let mut saved: Value = serde_json::from_slice(&out.stdout).unwrap();
    saved["report"][0]["n"] = Value::from(501);
    std::fs::write(&path, serde_json::to_vec(&saved).unwrap()).unwrap();
    assert_eq!(
        run(&["verify", "--report", path.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn idcode_search_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let found = json(&run(&[
        "idcode",
        "search",
        "--channel",
        "bsc:0.05",
        "--eps",
        "0.2",
        "--delta",
        "0.2",
    ]));
    let path = dir.path().join("code.json");
    std::fs::write(&path, serde_json::to_vec(&found["report"]["best_code"]).unwrap()).unwrap();
    let eval = json(&run(&[
        "idcode",
        "eval",
        "--channel",
        "bsc:0.05",
        "--code",
        path.to_str().unwrap(),
    ]));
    assert!(number(&eval["report"]["type1"]) <= 0.2 + 1e-9);
    assert!(number(&eval["report"]["type2"]) <= 0.2 + 1e-9);
}

#[test]
fn selftest_passes() {
    let out = run(&["--selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["failed"], 0);
}
