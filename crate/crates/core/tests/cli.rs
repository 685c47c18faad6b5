//! End-to-end checks of the command-line interface: subcommands, exit
//! codes and document round-trips, driving the compiled binary directly.

use std::path::PathBuf;
use std::process::{Command, Output};

fn polyclinch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyclinch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_temp(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("polyclinch-cli-{name}-{}", std::process::id()));
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn example1_prints_the_refutation_and_succeeds() {
    let output = polyclinch(&["example1"]);
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("\"sponsored_search\""));
    assert!(stdout.contains("x = [1, 2], pi = [0, 1]"));
    assert!(stdout.contains("welfare 18 > 14"));
}

#[test]
fn generate_run_verify_round_trip() {
    let gen = polyclinch(&[
        "generate",
        "--seed",
        "5",
        "--n",
        "3",
        "--kind",
        "multi-unit",
        "--epsilon",
        "1/2",
    ]);
    assert!(gen.status.success());
    let scenario_json = String::from_utf8(gen.stdout).unwrap();
    let path = write_temp("scenario", &scenario_json);

    let run = polyclinch(&["run", path.to_str().unwrap(), "--check-invariants"]);
    assert!(run.status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&run.stdout).expect("report is JSON");
    assert_eq!(report["tool"], "polyclinch");
    assert!(report["outcome"]["x"].is_array());
    assert!(report["invariants"]["violations"]
        .as_array()
        .unwrap()
        .is_empty());

    let verify = polyclinch(&[
        "verify",
        path.to_str().unwrap(),
        "--pareto",
        "--ic",
        "--oracle",
    ]);
    assert!(verify.status.success(), "{verify:?}");
    let report: serde_json::Value = serde_json::from_slice(&verify.stdout).unwrap();
    assert_eq!(report["verification"]["passed"], true);

    std::fs::remove_file(path).ok();
}

#[test]
fn two_agent_multi_unit_report_matches_the_hand_simulation() {
    let path = write_temp(
        "two-agent",
        r#"{
            "environment": {"kind": "multi_unit", "supply": "1"},
            "agents": [{"value": "3", "ability_to_pay": [["0", "100"]]},
                       {"value": "2", "ability_to_pay": [["0", "100"]]}],
            "epsilon": "1"
        }"#,
    );
    let run = polyclinch(&["run", path.to_str().unwrap(), "--check-invariants"]);
    assert!(run.status.success());
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(report["outcome"]["x"], serde_json::json!(["1", "0"]));
    assert_eq!(report["outcome"]["pi"], serde_json::json!(["2", "0"]));
    // Report completeness: one dropping record per agent, each exactly once.
    let dropping = report["dropping"].as_array().unwrap();
    assert_eq!(dropping.len(), 2);
    for (agent, record) in dropping.iter().enumerate() {
        assert_eq!(record["agent"], agent);
    }
    std::fs::remove_file(path).ok();
}

#[test]
fn generate_is_deterministic_and_honors_env_seed() {
    let args = ["generate", "--seed", "9", "--n", "2", "--kind", "explicit-table"];
    let a = polyclinch(&args);
    let b = polyclinch(&args);
    assert_eq!(a.stdout, b.stdout);

    let via_env = Command::new(env!("CARGO_BIN_EXE_polyclinch"))
        .args(["generate", "--n", "2", "--kind", "explicit-table"])
        .env("CLINCH_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(via_env.stdout, a.stdout);
}

#[test]
fn reports_are_byte_identical_across_invocations() {
    let gen = polyclinch(&["generate", "--seed", "31", "--n", "4", "--kind", "sponsored-search"]);
    let path = write_temp("det-scenario", &String::from_utf8(gen.stdout).unwrap());
    let first = polyclinch(&["run", path.to_str().unwrap(), "--trace", "full"]);
    let second = polyclinch(&["run", path.to_str().unwrap(), "--trace", "full"]);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    std::fs::remove_file(path).ok();
}

#[test]
fn malformed_documents_exit_with_code_two() {
    let path = write_temp("bad-json", "{ not json");
    let output = polyclinch(&["run", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    std::fs::remove_file(path).ok();

    // Structurally valid JSON, semantically invalid table.
    let path = write_temp(
        "bad-table",
        r#"{
            "environment": {"kind": "explicit_table", "n": 1, "values": {"0": "1", "1": "1"}},
            "agents": [{"value": "1", "ability_to_pay": [["0", "1"]]}],
            "epsilon": "1"
        }"#,
    );
    let output = polyclinch(&["run", path.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("f(empty)"), "stderr: {stderr}");
    std::fs::remove_file(path).ok();

    let output = polyclinch(&["run", "/nonexistent/scenario.json"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn reports_can_be_written_to_a_file() {
    let gen = polyclinch(&["generate", "--seed", "77", "--n", "2"]);
    let path = write_temp("scenario-out", &String::from_utf8(gen.stdout).unwrap());
    let out = std::env::temp_dir().join(format!("polyclinch-report-{}", std::process::id()));

    let run = polyclinch(&[
        "run",
        path.to_str().unwrap(),
        "--trace",
        "full",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report["checkpoints"].is_array());
    assert!(report["clinch_events"].is_array());

    std::fs::remove_file(path).ok();
    std::fs::remove_file(out).ok();
}
