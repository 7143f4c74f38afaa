use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/reference-example.json")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn design_fixture(dir: &TempDir) -> String {
    let out = dir.path().join("solution.json").to_string_lossy().into_owned();
    let o = run(&["design", "-i", fixture().to_str().unwrap(), "-o", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn analyze_fixture() {
    let o = run(&["analyze", "--input", fixture().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("6 SCCs, 5 parents, min agents 5\n"), "{text}");
    assert!(text.contains("self-damped: true"));
    assert!(text.contains("states [10, 11, 12]"));
}

#[test]
fn analyze_single_node_and_json_report() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "one.txt", "nodes 1\n");
    let report = dir.path().join("report.json").to_string_lossy().into_owned();
    let o = run(&["analyze", "-i", &input, "-o", &report]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("1 SCC, 1 parent, min agents 1\n"));
    let v: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["min_agents"], 1);
    assert_eq!(v["self_damped"], true);
}

#[test]
fn analyze_reports_missing_self_loops() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "p.json",
        r#"{"system": {"nodes": 3, "edges": [[0, 1], [1, 1]]}, "self_loops_implicit": false}"#,
    );
    let o = run(&["analyze", "-i", &input]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("self-damped: false (missing self-loops on [0, 2])"));
}

#[test]
fn parse_errors_exit_2_with_position() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.txt", "nodes 3\n0 1\n1 x\n");
    let o = run(&["analyze", "-i", &bad]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error[parse]: "), "{err}");
    assert!(err.contains("line 3, column 3"), "{err}");
    assert_eq!(err.lines().count(), 1);

    let json = write(&dir, "bad.json", "{\"system\": ");
    assert_eq!(run(&["analyze", "-i", &json]).status.code(), Some(2));
    assert_eq!(run(&["analyze"]).status.code(), Some(2));
}

#[test]
fn design_single_node() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "one.json",
        r#"{"system": {"nodes": 1, "edges": []}, "delta": [[2.0]], "eta": [[0]]}"#,
    );
    let o = run(&["design", "-i", &input]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["total_cost"], 2.0);
    assert_eq!(v["schema"], "netest/v1");
}

#[test]
fn design_fixture_matches_expected_tree_and_measurements() {
    let dir = TempDir::new().unwrap();
    let sol: Value = serde_json::from_str(&fs::read_to_string(design_fixture(&dir)).unwrap()).unwrap();
    let edges: Vec<(u64, u64)> = sol["network_edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e[0].as_u64().unwrap() + 1, e[1].as_u64().unwrap() + 1))
        .collect();
    assert_eq!(edges, vec![(1, 5), (2, 4), (2, 5), (3, 5)]);
    let states: Vec<u64> = sol["measurement_triplets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t[1].as_u64().unwrap() + 1)
        .collect();
    assert_eq!(states, vec![10, 17, 6, 11, 16]);
    assert!((sol["communication_cost"].as_f64().unwrap() - 11.5608).abs() < 1e-9);
    assert!((sol["measurement_cost"].as_f64().unwrap() - 17.0511).abs() < 1e-9);
}

#[test]
fn design_is_byte_deterministic() {
    let a = run(&["design", "-i", fixture().to_str().unwrap()]);
    let b = run(&["design", "-i", fixture().to_str().unwrap()]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn design_writes_dot_files() {
    let dir = TempDir::new().unwrap();
    let dot = dir.path().join("dot");
    let o = run(&[
        "design",
        "-i",
        fixture().to_str().unwrap(),
        "-o",
        dir.path().join("s.json").to_str().unwrap(),
        "--dot",
        dot.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let system = fs::read_to_string(dot.join("system.dot")).unwrap();
    assert_eq!(system.matches("subgraph cluster_parent").count(), 5);
    assert_eq!(system.matches("shape=box").count(), 5);
    let network = fs::read_to_string(dot.join("network.dot")).unwrap();
    assert_eq!(network.matches(" -- ").count(), 4);
}

#[test]
fn design_failure_exit_codes() {
    let dir = TempDir::new().unwrap();
    let not_damped = write(
        &dir,
        "nsd.json",
        r#"{"system": {"nodes": 2, "edges": [[0, 1]]}, "self_loops_implicit": false,
            "delta": [[1, 1]], "eta": [[0]]}"#,
    );
    let o = run(&["design", "-i", &not_damped]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error[not-self-damped]"));

    let directed = write(
        &dir,
        "dir.json",
        r#"{"system": {"nodes": 3, "edges": [[0, 1], [0, 2]]},
            "delta": [[1, 1, 1], [1, 1, 1]], "eta": [[0, 1], [2, 0]]}"#,
    );
    let o = run(&["design", "-i", &directed]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error[asymmetric-costs]"));

    let too_many = write(
        &dir,
        "many.json",
        r#"{"system": {"nodes": 3, "edges": [[0, 1], [0, 2]]},
            "delta": [[1, 1, 1], [1, 1, 1], [1, 1, 1]],
            "eta": [[0, 1, 1], [1, 0, 1], [1, 1, 0]]}"#,
    );
    assert_eq!(run(&["design", "-i", &too_many]).status.code(), Some(3));
    let o = run(&["design", "-i", &too_many, "--allow-extra-agents"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let blind = write(
        &dir,
        "blind.json",
        r#"{"system": {"nodes": 3, "edges": [[0, 1], [0, 2]]},
            "delta": [[1, "inf", 1], [1, "inf", 1]], "eta": [[0, 1], [1, 0]]}"#,
    );
    let o = run(&["design", "-i", &blind]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[infeasible-scc]"));

    let split = write(
        &dir,
        "split.json",
        r#"{"system": {"nodes": 3, "edges": [[0, 1], [0, 2]]},
            "delta": [[1, 1, 1], [1, 1, 1]], "eta": [[0, "inf"], ["inf", 0]]}"#,
    );
    assert_eq!(run(&["design", "-i", &split]).status.code(), Some(3));

    let no_costs = write(&dir, "nc.json", r#"{"system": {"nodes": 1, "edges": []}}"#);
    assert_eq!(run(&["design", "-i", &no_costs]).status.code(), Some(2));
}

#[test]
fn verify_round_trip_and_tampering() {
    let dir = TempDir::new().unwrap();
    let sol_path = design_fixture(&dir);
    let input = fixture();
    let input = input.to_str().unwrap();

    let o = run(&["verify", "-i", input, "--solution", &sol_path]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["observable"], true);

    let sol: Value = serde_json::from_str(&fs::read_to_string(&sol_path).unwrap()).unwrap();

    let mut cut = sol.clone();
    cut["network_pattern"]["entries"]
        .as_array_mut()
        .unwrap()
        .retain(|e| e[0] == e[1] || !(e[0] == 1 || e[1] == 1) || (e[0] == 1 && e[1] == 1));
    let cut_path = write(&dir, "cut.json", &cut.to_string());
    assert_eq!(run(&["verify", "-i", input, "--solution", &cut_path]).status.code(), Some(5));

    let mut blind = sol.clone();
    blind["measurement_pattern"]["entries"]
        .as_array_mut()
        .unwrap()
        .retain(|e| e[0] != 2);
    let blind_path = write(&dir, "blind.json", &blind.to_string());
    let o = run(&["verify", "-i", input, "--solution", &blind_path]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).starts_with("error[verification-failed]"));

    let mut wrong = sol;
    wrong["schema"] = Value::from("netest/v0");
    let wrong_path = write(&dir, "wrong.json", &wrong.to_string());
    assert_eq!(run(&["verify", "-i", input, "--solution", &wrong_path]).status.code(), Some(2));
}

#[test]
fn verify_with_oracle_prints_tally() {
    let dir = TempDir::new().unwrap();
    let sol = design_fixture(&dir);
    let o = run(&[
        "verify",
        "-i",
        fixture().to_str().unwrap(),
        "--solution",
        &sol,
        "--oracle",
        "100",
        "--seed",
        "11",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["oracle"]["trials"], 100);
    assert!(report["oracle"]["observable_trials"].as_u64().unwrap() >= 99);
    assert!(stderr(&o).contains("trials full rank"));
}

#[test]
fn oracle_command_on_measurement_sets() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "chain.txt", "nodes 3\n0 1\n1 2\n");
    let o = run(&["oracle", "-i", &input, "--measured", "2", "--trials", "40", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["observable_trials"], 40);
    let o = run(&["oracle", "-i", &input, "--measured", "0", "--trials", "40"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["observable_trials"], 0);
    assert_eq!(run(&["oracle", "-i", &input]).status.code(), Some(2));
}

#[test]
fn discretize_examples() {
    let dir = TempDir::new().unwrap();
    let zero = write(&dir, "zero.json", "[[0, 0], [0, 0]]");
    let o = run(&["discretize", "-i", &zero, "-T", "0.7"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["matrix"], serde_json::json!([[1.0, 0.0], [0.0, 1.0]]));

    let decay = write(&dir, "decay.json", "[[-1]]");
    let out = dir.path().join("d.json").to_string_lossy().into_owned();
    let o = run(&["discretize", "-i", &decay, "--step", "0.1", "-o", &out]);
    assert_eq!(stdout(&o), "self-damped: true\n");
    let v: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert!((v["matrix"][0][0].as_f64().unwrap() - 0.9).abs() < 1e-15);

    let growth = write(&dir, "growth.json", "[[2]]");
    let o = run(&["discretize", "-i", &growth, "-T", "1", "--method", "tustin"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error[singular]"));
}
