use std::path::PathBuf;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_looptrace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn corpus(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("../../corpus");
    p.push(format!("{name}.mil"));
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn parse_prints_canonical_source() {
    let out = bin(&["parse", &corpus("max_in_array")]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("routine max_in_array"));
}

#[test]
fn parse_reports_syntax_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mil");
    std::fs::write(&bad, "").unwrap();
    let out = bin(&["parse", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("1:1"));
}

#[test]
fn analyze_emits_loop_structure() {
    let out = bin(&["analyze", &corpus("gcd")]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["loop_count"], 1);
    assert_eq!(v["loops"][0]["branches"], 2);
}

#[test]
fn unroll_depth_zero_replaces_loop() {
    let out = bin(&["unroll", &corpus("factorial"), "--depth", "0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("check false end"));
    assert!(!text.contains("until"));
}

#[test]
fn unroll_check_passes_on_corpus() {
    let out = bin(&["unroll", &corpus("gcd"), "--depth", "3", "--check"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn instrument_writes_targets() {
    let dir = tempfile::tempdir().unwrap();
    let targets = dir.path().join("t.json");
    let out = bin(&[
        "instrument",
        &corpus("gcd"),
        "--depth",
        "2",
        "--targets",
        targets.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("-- [target 4]"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(targets).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4);
}

#[test]
fn gen_then_run_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("gcd.json");
    let out = bin(&[
        "gen",
        &corpus("gcd"),
        "--depth",
        "2",
        "--int-range",
        "0..12",
        "--array-max",
        "0",
        "-o",
        suite.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&suite).unwrap()).unwrap();
    assert_eq!(v["tests"].as_array().unwrap().len(), 4);
    assert!(bin(&["run", &corpus("gcd"), "--suite", suite.to_str().unwrap()]).status.success());
}

#[test]
fn gen_is_deterministic_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let args = [
            "gen",
            &corpus("binary_search"),
            "--depth",
            "3",
            "--order",
            "random",
            "--seed",
            "9",
            "-o",
            path.to_str().unwrap(),
        ];
        assert!(bin(&args).status.success());
        std::fs::read_to_string(path).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn mutate_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let mutants = dir.path().join("mutants");
    let out = bin(&[
        "mutate",
        &corpus("factorial"),
        "--count",
        "12",
        "--seed",
        "3",
        "-o",
        mutants.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(mutants.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.as_array().unwrap().len(), 12);
    assert!(mutants.join("factorial_m1.mil").exists());

    let report = dir.path().join("report.json");
    let out = bin(&[
        "eval",
        &corpus("factorial"),
        "--mutants",
        mutants.to_str().unwrap(),
        "--max-depth",
        "3",
        "--runs",
        "2",
        "--seed",
        "5",
        "-o",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["stats"].as_array().unwrap().len(), 3);
    let csv = std::fs::read_to_string(report.with_extension("csv")).unwrap();
    assert!(csv.starts_with("depth,p_np,p_na\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn run_fails_on_a_faulty_variant() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("s.json");
    assert!(bin(&["gen", &corpus("factorial"), "--depth", "3", "-o", suite.to_str().unwrap()])
        .status
        .success());
    let source = std::fs::read_to_string(corpus("factorial")).unwrap();
    let faulty = dir.path().join("factorial.mil");
    std::fs::write(&faulty, source.replace("f := f * i", "f := f + i")).unwrap();
    let out = bin(&["run", faulty.to_str().unwrap(), "--suite", suite.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stdout(&out).contains("postcondition"));
}

#[test]
fn laws_pass() {
    let out = bin(&["laws", "--samples", "100"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("33 laws, 0 failed"));
    let out = bin(&["laws", "--law", "Def_equiv", "--exhaustive"]);
    assert!(out.status.success());
}

#[test]
fn corpus_list_and_gen_all() {
    let out = bin(&["corpus", "list"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 13);
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["corpus", "gen-all", "--depth", "2", "-o", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(dir.path().join("gcd.suite.json").exists());
}

#[test]
fn corpus_eval_all_writes_totals() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&[
        "corpus",
        "eval-all",
        "--count",
        "5",
        "--runs",
        "2",
        "--max-depth",
        "2",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("totals.csv").exists());
    assert!(stdout(&out).contains("corpus total"));
}

#[test]
fn bad_flags_and_unknown_commands_fail() {
    assert!(!bin(&["frobnicate"]).status.success());
    assert!(!bin(&["unroll", &corpus("gcd")]).status.success());
    assert!(!bin(&["parse", "/nonexistent/file.mil"]).status.success());
    assert!(!bin(&["mutate", &corpus("gcd"), "--count", "2", "--ops", "bogus", "-o", "/tmp/x"]).status.success());
}
