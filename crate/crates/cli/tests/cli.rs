//! End-to-end tests of the `mecke` binary: golden reports, exit statuses and
//! side tables.
//!
//! Golden files hold the report without its `runtime` block. Regenerate them
//! with `UPDATE_GOLDEN=1 cargo test -p mecke-cli`.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn config(name: &str) -> PathBuf {
    manifest_dir().join("tests/configs").join(format!("{name}.toml"))
}

fn mecke(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mecke"))
        .args(args)
        .env_remove("MECKE_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn without_runtime(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).expect("report written");
    let mut report: Value = serde_json::from_str(&text).expect("report is JSON");
    let runtime = report
        .as_object_mut()
        .and_then(|m| m.remove("runtime"))
        .expect("report has a runtime block");
    assert!(runtime["wall_seconds"].is_number());
    report
}

/// Runs a scenario file with the given worker count and returns the report
/// without its runtime block.
fn run_config(name: &str, workers: usize, dir: &Path) -> (Output, Value) {
    let report = dir.join(format!("{name}-{workers}.json"));
    let out = mecke(&[
        "run",
        "--config",
        config(name).to_str().unwrap(),
        "--workers",
        &workers.to_string(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{name}: {}{}", stdout(&out), stderr(&out));
    (out, without_runtime(&report))
}

const SCENARIOS: [&str; 9] = [
    "palm_diag",
    "moments_poisson",
    "moments_mixed",
    "oracle_exp",
    "levy_simple",
    "levy_general",
    "martingale",
    "exit_law",
    "partitions",
];

#[test]
fn reports_match_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for name in SCENARIOS {
        let (_, report) = run_config(name, 1, dir.path());
        let golden = manifest_dir().join("tests/golden").join(format!("{name}.json"));
        if update {
            let mut text = serde_json::to_string_pretty(&report).unwrap();
            text.push('\n');
            std::fs::write(&golden, text).unwrap();
            continue;
        }
        let expected: Value = serde_json::from_str(
            &std::fs::read_to_string(&golden).unwrap_or_else(|_| panic!("missing golden file {}", golden.display())),
        )
        .unwrap();
        assert_eq!(report, expected, "{name} differs from {}", golden.display());
    }
}

#[test]
fn reports_do_not_depend_on_workers() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["palm_diag", "levy_simple", "exit_law"] {
        let (_, one) = run_config(name, 1, dir.path());
        let (_, three) = run_config(name, 3, dir.path());
        assert_eq!(one, three, "{name}");
    }
}

#[test]
fn diagonal_indicator_report_shows_the_merged_term() {
    let dir = tempfile::tempdir().unwrap();
    let (out, report) = run_config("palm_diag", 1, dir.path());
    assert!(stdout(&out).contains("PASS mecke-palm"));
    assert_eq!(report["passed"], Value::Bool(true));
    let terms = report["reports"][0]["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 2);
    let merged = terms.iter().find(|t| t["k"] == 1).unwrap();
    assert_eq!(merged["estimate"]["mean"].as_f64().unwrap(), 1.0);

    let csv = std::fs::read_to_string(dir.path().join("palm_diag-1.terms.csv")).unwrap();
    assert!(csv.starts_with("report,identity,term,k,multiplicity,mean,std_error,replicates"));
    assert_eq!(csv.lines().count(), 3);
    let checks = std::fs::read_to_string(dir.path().join("palm_diag-1.checks.csv")).unwrap();
    assert!(checks.lines().nth(1).unwrap().contains("mecke-palm"));
}

#[test]
fn path_summaries_are_exported() {
    let dir = tempfile::tempdir().unwrap();
    run_config("levy_simple", 1, dir.path());
    let csv = std::fs::read_to_string(dir.path().join("levy_simple-1.paths.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "path,jumps,first_jump,last_jump,terminal,max_jump");
    assert_eq!(lines.count(), 5);
}

#[test]
fn partitions_from_flags() {
    let out = mecke(&["partitions", "--n", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("n = 4: 15 partitions"), "{text}");
    let listed = text.lines().filter(|l| l.starts_with("  {")).count();
    assert_eq!(listed, 15);
    for (t, m) in [("4", 1), ("3+1", 4), ("2+2", 3), ("2+1+1", 6), ("1+1+1+1", 1)] {
        assert!(text.contains(&format!("type {t} ({m})")), "{t}: {text}");
    }
    let out = mecke(&["partitions", "--n", "4", "--epsilon", "1101"]);
    assert!(stdout(&out).starts_with("n = 4, epsilon = 1101: 5 admissible of 15 partitions"));
}

#[test]
fn verify_from_flags_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("flags.json");
    let out = mecke(&[
        "verify-mecke-palm",
        "--process",
        "diag-indicator",
        "--epsilon",
        "11",
        "--replicates",
        "500",
        "--seed",
        "3",
        "--workers",
        "2",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = without_runtime(&report);
    assert_eq!(r["seed"], 3);
    assert_eq!(r["replicates"], 500);
    assert_eq!(r["reports"][0]["lhs"]["replicates"], 500);

    let json = r#"{"kind":"count-weighted","exponents":[1.0]}"#;
    let out = mecke(&["verify-mecke-palm", "--process", json, "--epsilon", "1", "--replicates", "500"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn oracle_from_flags() {
    let out = mecke(&["oracle", "--g", r#"{"kind":"exp-count","theta":1.0}"#, "--replicates", "2000", "--nmax", "25"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("series value 0.531463605387"));
}

#[test]
fn malformed_epsilon_length_exits_with_status_two() {
    let out = mecke(&["verify-mecke-palm", "--process", "diag-indicator", "--epsilon", "101"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--epsilon"), "{}", stderr(&out));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(config("palm_diag")).unwrap().replace("epsilon = \"11\"", "epsilon = \"1\"");
    std::fs::write(&bad, text).unwrap();
    let out = mecke(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mecke_palm.epsilon"), "{}", stderr(&out));
}

#[test]
fn unknown_keys_and_bad_values_name_their_field() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(config("levy_simple")).unwrap();
    for (from, to, field) in [
        ("horizon = 3.0", "horizon = 3.0\nhorizn = 2.0", "levy"),
        ("seed = 15", "seed = -1", "budgets.seed"),
        ("a = 0.5", "a = \"half\"", "levy.functional"),
        ("schema_version = 1", "schema_version = 9", "schema_version"),
    ] {
        let path = dir.path().join("c.toml");
        std::fs::write(&path, base.replace(from, to)).unwrap();
        let out = mecke(&["run", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{to}");
        assert!(stderr(&out).contains(field), "{to}: {}", stderr(&out));
    }
}

#[test]
fn subcommand_must_match_the_scenario() {
    let out = mecke(&["martingale", "--config", config("palm_diag").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("scenario"));
}

#[test]
fn failing_gate_exits_with_status_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("control.toml");
    let text = std::fs::read_to_string(config("palm_diag"))
        .unwrap()
        .replace("epsilon = \"11\"", "epsilon = \"11\"\nexpansion = \"singletons-only\"");
    std::fs::write(&path, text).unwrap();
    let out = mecke(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stdout(&out));
    assert!(stdout(&out).contains("FAIL mecke-palm"));
}

#[test]
fn numeric_failure_exits_with_status_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("capped.toml");
    let text = std::fs::read_to_string(config("levy_general"))
        .unwrap()
        .replace("scenario = \"levy-general\"", "scenario = \"levy-general\"\nlevy = { max_evaluations = 1 }");
    std::fs::write(&path, text).unwrap();
    let out = mecke(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}{}", stdout(&out), stderr(&out));
    assert!(stderr(&out).contains("levy-system"));
}
