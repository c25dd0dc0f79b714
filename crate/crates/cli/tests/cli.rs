//! End-to-end tests for the `qosc` binary: exit codes, JSON and CSV output
//! shapes, and flag/environment precedence, driven through the checked-in
//! fixture repositories.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

/// Command for the binary under test, with the deadline variable cleared so
/// ambient configuration cannot leak into a test.
fn qosc() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qosc"));
    cmd.env_remove("QOSC_DEADLINE_MS");
    cmd
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().expect("spawning qosc");
    (
        status.code().expect("qosc exited on a signal"),
        String::from_utf8(stdout).expect("stdout is UTF-8"),
        String::from_utf8(stderr).expect("stderr is UTF-8"),
    )
}

fn parse(stdout: &str) -> Value {
    serde_json::from_str(stdout).expect("stdout is one JSON document")
}

#[test]
fn validate_prints_section_sizes() {
    let (code, out, _) = run(qosc().arg("validate").arg(fixture("running_example.repo.json")));
    assert_eq!(code, 0);
    let v = parse(&out);
    assert_eq!(v["services"], 32);
    assert_eq!(v["queries"], 2);
}

#[test]
fn validate_rejects_an_unparseable_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.repo.json");
    std::fs::write(&path, "{ not json").unwrap();
    let (code, _, err) = run(qosc().arg("validate").arg(&path));
    assert_eq!(code, 2);
    assert!(err.starts_with("error:"), "stderr was: {err}");
}

#[test]
fn validate_lists_violations_and_exits_one() {
    // A well-formed document that breaks a document rule: duplicate id.
    let mut doc: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("worked_refinement.repo.json")).unwrap())
            .unwrap();
    let services = doc["services"].as_array_mut().unwrap();
    let twin = services[0].clone();
    services.push(twin);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dup.repo.json");
    std::fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();

    let (code, _, err) = run(qosc().arg("validate").arg(&path));
    assert_eq!(code, 1);
    assert!(
        err.contains("violation: duplicate service id `clean_basic`"),
        "stderr was: {err}"
    );
}

#[test]
fn abstract_emits_a_consistent_hierarchy_report() {
    let (code, out, _) = run(qosc().arg("abstract").arg(fixture("running_example.repo.json")));
    assert_eq!(code, 0);
    let v = parse(&out);
    assert_eq!(v["service_count"], 32);
    let classes = v["classes"].as_array().unwrap().len() as u64;
    assert_eq!(v["class_count"].as_u64(), Some(classes));
    let groups = v["groups"].as_array().unwrap().len() as u64;
    assert_eq!(v["group_count"].as_u64(), Some(groups));
    let trees = v["trees"].as_array().unwrap().len() as u64;
    assert_eq!(v["tree_count"].as_u64(), Some(trees));
}

#[test]
fn abstract_out_flag_writes_the_file_and_keeps_stdout_quiet() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let (code, out, _) = run(qosc()
        .arg("abstract")
        .arg(fixture("running_example.repo.json"))
        .arg("--out")
        .arg(&path));
    assert_eq!(code, 0);
    assert!(out.is_empty(), "stdout was: {out}");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(report["service_count"], 32);
}

#[test]
fn compose_refines_the_walkthrough_to_the_reliable_members() {
    let (code, out, _) = run(qosc()
        .arg("compose")
        .arg(fixture("worked_refinement_e2e.repo.json"))
        .arg("--query")
        .arg("0")
        .arg("--level")
        .arg("1"));
    assert_eq!(code, 0);
    let v = parse(&out);
    assert_eq!(v["outcome"], "solved");
    assert_eq!(v["level_used"], 1);
    // The returned plan is always concrete, whatever level answered.
    assert_eq!(v["plan"]["level"], 0);
    let nodes: Vec<&str> = v["plan"]["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| n.as_str().unwrap())
        .collect();
    assert_eq!(nodes, ["clean_deep", "score_deep"]);
    assert_eq!(v["plan"]["qos"]["response_time"].as_f64(), Some(160.0));
    assert_eq!(v["plan"]["qos"]["reliability"].as_f64(), Some(0.9405));

    let refinement = v["trace"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["event"] == "partial_refinement")
        .expect("trace records the partial-refinement pass");
    assert_eq!(refinement["violated"], serde_json::json!(["reliability"]));
    assert_eq!(refinement["outcome"], "satisfied");
}

#[test]
fn compose_exits_three_when_no_level_has_a_plan() {
    let (code, out, _) = run(qosc()
        .arg("compose")
        .arg(fixture("worked_refinement_e2e.repo.json"))
        .arg("--query")
        .arg("1"));
    assert_eq!(code, 3);
    let v = parse(&out);
    assert_eq!(v["outcome"], "no_solution");
}

#[test]
fn compose_without_refinement_stops_at_the_requested_level() {
    // Level 1+ representatives violate the reliability bound, so with the
    // fallback machinery disabled the level simply has no plan.
    let (code, out, _) = run(qosc()
        .arg("compose")
        .arg(fixture("worked_refinement_e2e.repo.json"))
        .arg("--query")
        .arg("0")
        .arg("--level")
        .arg("3")
        .arg("--refine")
        .arg("off"));
    assert_eq!(code, 3);
    let v = parse(&out);
    assert_eq!(v["outcome"], "no_solution");
    let trace = v["trace"].as_array().unwrap();
    assert_eq!(trace.len(), 1);
    assert_eq!(trace[0]["event"], "no_plan_at_level");
    assert_eq!(trace[0]["level"], 3);
}

#[test]
fn compose_optimal_rt_backend_ignores_constraints() {
    // Query 1's response-time bound (50) is below the fastest pipeline (60),
    // but the single-parameter backend answers anyway.
    let (code, out, _) = run(qosc()
        .arg("compose")
        .arg(fixture("worked_refinement.repo.json"))
        .arg("--query")
        .arg("1")
        .arg("--level")
        .arg("0")
        .arg("--backend")
        .arg("optimal-rt"));
    assert_eq!(code, 0);
    let v = parse(&out);
    assert_eq!(v["outcome"], "solved");
    assert_eq!(v["level_used"], 0);
    assert_eq!(v["plan"]["qos"]["response_time"].as_f64(), Some(60.0));
}

#[test]
fn compose_zero_deadline_exits_four() {
    let (code, _, err) = run(qosc()
        .arg("compose")
        .arg(fixture("running_example.repo.json"))
        .arg("--deadline-ms")
        .arg("0"));
    assert_eq!(code, 4, "stderr was: {err}");
}

#[test]
fn deadline_env_var_applies_and_the_flag_wins() {
    let (code, _, _) = run(qosc()
        .arg("compose")
        .arg(fixture("running_example.repo.json"))
        .env("QOSC_DEADLINE_MS", "0"));
    assert_eq!(code, 4);

    let (code, _, _) = run(qosc()
        .arg("compose")
        .arg(fixture("running_example.repo.json"))
        .env("QOSC_DEADLINE_MS", "0")
        .arg("--deadline-ms")
        .arg("60000"));
    assert_eq!(code, 0);

    let (code, _, err) = run(qosc()
        .arg("compose")
        .arg(fixture("running_example.repo.json"))
        .env("QOSC_DEADLINE_MS", "soon"));
    assert_eq!(code, 2);
    assert!(err.contains("QOSC_DEADLINE_MS"), "stderr was: {err}");
}

#[test]
fn compose_query_index_out_of_range_is_a_usage_error() {
    let (code, _, err) = run(qosc()
        .arg("compose")
        .arg(fixture("worked_refinement.repo.json"))
        .arg("--query")
        .arg("9"));
    assert_eq!(code, 2);
    assert!(err.contains("out of range"), "stderr was: {err}");
}

#[test]
fn compose_output_is_byte_identical_across_runs() {
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let (code, out, _) = run(qosc()
            .arg("compose")
            .arg(fixture("worked_refinement_e2e.repo.json"))
            .arg("--query")
            .arg("0"));
        assert_eq!(code, 0);
        outputs.push(out);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn gen_is_deterministic_and_produces_a_valid_repository() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.repo.json");
    let b = dir.path().join("b.repo.json");
    for path in [&a, &b] {
        let (code, out, _) = run(qosc()
            .arg("gen")
            .arg("--out")
            .arg(path)
            .arg("--seed")
            .arg("7")
            .arg("--services")
            .arg("30")
            .arg("--concepts")
            .arg("20")
            .arg("--queries")
            .arg("2")
            .arg("--mix")
            .arg("0.4,0.2,0.2,0.2"));
        assert_eq!(code, 0);
        assert_eq!(parse(&out)["services"], 30);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let (code, _, _) = run(qosc().arg("validate").arg(&a));
    assert_eq!(code, 0);
}

#[test]
fn gen_rejects_a_malformed_mix() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(qosc()
        .arg("gen")
        .arg("--out")
        .arg(dir.path().join("x.repo.json"))
        .arg("--mix")
        .arg("0.5,0.5"));
    assert_eq!(code, 2);
    assert!(err.contains("four"), "stderr was: {err}");
}

#[test]
fn bench_emits_the_pinned_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    let (code, _, _) = run(qosc()
        .arg("bench")
        .arg(fixture("worked_refinement.repo.json"))
        .arg("--levels")
        .arg("0,3")
        .arg("--query")
        .arg("0")
        .arg("--repetitions")
        .arg("1")
        .arg("--out")
        .arg(&path));
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "dataset,level,repo_services,dg_services,dg_build_ms,solve_ms,plan_count,objective_value,refinement,speedup"
    );
    assert_eq!(lines.len(), 3, "one row per requested level:\n{csv}");
    for (line, level) in lines[1..].iter().zip(["0", "3"]) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 10, "row was: {line}");
        assert!(fields[0].ends_with("#q0"), "row was: {line}");
        assert_eq!(fields[1], level);
        assert_eq!(fields[2], "6");
    }
    // Level 0 is its own baseline.
    assert_eq!(lines[1].split(',').last(), Some("1.00"));
}

#[test]
fn bench_zero_repetitions_is_a_usage_error() {
    let (code, _, _) = run(qosc()
        .arg("bench")
        .arg(fixture("worked_refinement.repo.json"))
        .arg("--repetitions")
        .arg("0"));
    assert_eq!(code, 2);
}
