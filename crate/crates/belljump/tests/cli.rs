//! End-to-end tests of the `belljump` binary: output schemas, exit codes,
//! and rerun determinism.

use std::process::{Command, Output};

fn belljump(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_belljump"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn model_list_names_all_bundled_models() {
    let out = belljump(&["model", "list"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in [
        "two_level",
        "bell_lattice",
        "random_hermitian",
        "compressed_povm",
    ] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn model_export_round_trips_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("two_level.json");
    let out = belljump(&[
        "model",
        "export",
        "two_level",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    // The exported file is a loadable model and re-exports byte-identically.
    let exported = std::fs::read(&path).unwrap();
    let again = belljump(&["model", "export", path.to_str().unwrap()]);
    assert!(again.status.success());
    assert_eq!(again.stdout, exported);

    let rates = belljump(&["rates", "--model", path.to_str().unwrap(), "--t", "1.0"]);
    assert!(rates.status.success());
    let text = stdout(&rates);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("from,to,rate"));
    let up: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("0,1,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((up - (0.5f64).tan()).abs() < 1e-10, "rate 0->1 was {up}");
    assert!(
        text.lines().any(|l| l == "1,0,0"),
        "reverse rate should be zero:\n{text}"
    );
}

#[test]
fn rates_prints_inf_at_a_node() {
    // The occupied label loses all weight at t = pi; the outgoing rate column
    // must say so rather than overflow or panic.
    let out = belljump(&["rates", "--t", "3.14159265358979"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(
        text.lines()
            .any(|l| l.starts_with("0,1,") && l.ends_with("inf")),
        "expected an infinite rate at the node:\n{text}"
    );
}

#[test]
fn simulate_stdout_is_json_with_stable_schema() {
    let args = [
        "simulate",
        "--n",
        "200",
        "--seed",
        "3",
        "--t-end",
        "2.0",
        "--checkpoints",
        "1.0,2.0",
    ];
    let out = belljump(&args);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["model"], "two_level");
    assert_eq!(doc["seed"], 3);
    let ensemble = &doc["ensemble"];
    for key in [
        "n",
        "checkpoints",
        "labels",
        "empirical",
        "expected",
        "tv",
        "cemetery_fraction_at",
        "mean_jumps",
        "jumps_se",
        "max_jumps_observed",
        "explosion_count",
        "cemetery_count",
        "min_weight_visited",
    ] {
        assert!(!ensemble[key].is_null(), "missing ensemble.{key}");
    }
    assert_eq!(ensemble["n"], 200);
    assert_eq!(ensemble["explosion_count"], 0);

    // Same invocation, same bytes.
    let rerun = belljump(&args);
    assert_eq!(out.stdout, rerun.stdout);
}

#[test]
fn simulate_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = belljump(&[
        "simulate",
        "--n",
        "100",
        "--t-end",
        "2.0",
        "--keep-paths",
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    for file in ["report.json", "empirical.csv", "trajectories.jsonl"] {
        assert!(out_dir.join(file).is_file(), "missing {file}");
    }
    let csv = std::fs::read_to_string(out_dir.join("empirical.csv")).unwrap();
    assert!(csv.starts_with("t,label,empirical,expected\n"));
    // One record per trajectory, each on its own line.
    let jsonl = std::fs::read_to_string(out_dir.join("trajectories.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 100);
    let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(first["index"], 0);
    assert!(!first["events"].is_null());
}

#[test]
fn verify_default_invocation_passes() {
    // The horizon runs right up to the first node; the default overshoot
    // tolerance must absorb the hazard-table error there.
    let out = belljump(&["verify", "--n", "500", "--seed", "11"]);
    let text = stdout(&out);
    assert!(out.status.success(), "verify failed:\n{text}");
    assert!(text.lines().count() >= 8);
    for line in text.lines() {
        assert!(line.starts_with("VERIFY "), "unexpected line: {line}");
        assert!(line.contains(": PASS ("), "not a pass: {line}");
    }
}

#[test]
fn verify_convergence_gate_passes_clear_of_nodes() {
    let out = belljump(&[
        "verify",
        "--n",
        "500",
        "--t-end",
        "2.0",
        "--grid",
        "128",
        "--seed",
        "11",
        "--picard-tol",
        "1e-4",
    ]);
    let text = stdout(&out);
    assert!(out.status.success(), "verify failed:\n{text}");
    assert!(
        text.lines()
            .any(|l| l.starts_with("VERIFY jump-expansion-convergence: PASS")),
        "missing convergence line:\n{text}"
    );
}

#[test]
fn verify_reports_violation_with_exit_code_one() {
    let out = belljump(&["verify", "--n", "50", "--grid", "128", "--tv-tol", "1e-9"]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(
        text.lines()
            .any(|l| l.starts_with("VERIFY occupancy: FAIL")),
        "expected an occupancy failure:\n{text}"
    );
}

#[test]
fn check_passes_on_bundled_models() {
    for model in [
        "two_level",
        "bell_lattice",
        "random_hermitian",
        "compressed_povm",
    ] {
        let out = belljump(&["check", "--model", model, "--t-end", "2.0"]);
        let text = stdout(&out);
        assert!(out.status.success(), "check {model} failed:\n{text}");
        assert_eq!(text.lines().count(), 4);
        assert!(text
            .lines()
            .all(|l| l.starts_with("CHECK ") && l.contains(": PASS (")));
    }
}

#[test]
fn oracle_emits_both_methods() {
    let out = belljump(&[
        "oracle", "--method", "both", "--grid", "64", "--t-end", "2.0",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,label,weight,method"));
    assert!(text.contains(",master_ode"));
    assert!(text.contains(",picard"));
}

#[test]
fn unknown_model_is_a_usage_error() {
    let out = belljump(&["simulate", "--model", "does_not_exist"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    assert!(err.contains("unknown model"), "stderr was: {err}");
}

#[test]
fn malformed_model_file_is_an_error_not_a_panic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, b"{\"name\": \"broken\"").unwrap();
    let out = belljump(&["rates", "--model", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr.clone())
        .unwrap()
        .starts_with("error:"));
}

#[test]
fn invalid_flag_values_are_usage_errors() {
    assert_eq!(
        belljump(&["simulate", "--n", "many"]).status.code(),
        Some(2)
    );
    assert_eq!(belljump(&["simulate", "--badflag"]).status.code(), Some(2));
    // keep-paths only makes sense with a file destination.
    assert_eq!(
        belljump(&["simulate", "--keep-paths"]).status.code(),
        Some(2)
    );
    // Horizon before start is rejected by validation, not by a crash.
    let out = belljump(&["simulate", "--t0", "2.0", "--t-end", "1.0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn threads_flag_does_not_change_output_bytes() {
    let run = |threads: &str| {
        let out = belljump(&[
            "simulate",
            "--n",
            "300",
            "--seed",
            "9",
            "--t-end",
            "2.5",
            "--threads",
            threads,
            "--model",
            "bell_lattice",
        ]);
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn node_epsilon_flag_reaches_the_engine() {
    // The relative threshold only makes sense inside the open unit interval.
    let out = belljump(&["simulate", "--node-epsilon", "10.0", "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
}
