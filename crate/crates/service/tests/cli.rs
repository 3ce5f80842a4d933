use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_idiomgraph");

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(state: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--state")
        .arg(state)
        .args(args)
        .env_remove("IDIOMGRAPH_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(state: &Path, args: &[&str]) -> String {
    let out = run(state, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(state: &Path, args: &[&str]) -> Value {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    serde_json::from_str(&ok(state, &full)).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Concepts, corpus, proposals, and one edge reviewed to acceptance.
fn populate(state: &Path) -> String {
    ok(state, &["concepts"]);
    ok(state, &["ingest", data("corpus.jsonl").to_str().unwrap()]);
    ok(state, &["propose", "--mode", "concept"]);
    ok(state, &["propose", "--mode", "cross", "--language", "hi", "--target-language", "mr"]);
    let batch = json(state, &["queue", "--role", "clinical", "--batch-size", "1"]);
    let edge = batch[0]["item"]["edge_id"].as_str().unwrap().to_owned();
    for role in ["linguistic", "clinical", "cultural"] {
        ok(state, &["decide", &edge, "--role", role, "--validator", &format!("v-{role}"), "--verdict", "accept"]);
    }
    edge
}

#[test]
fn metrics_on_empty_state_are_zero() {
    let dir = TempDir::new().unwrap();
    let m = json(dir.path(), &["metrics"]);
    assert_eq!(m["weakly_connected_components"], 0);
    assert_eq!(m["mean_degree"], 0.0);
    assert_eq!(m["isolated_expression_ratio"], 0.0);
    assert_eq!(m["concept_coverage"], 0.0);
    assert!(m["node_counts"].as_object().unwrap().values().all(|v| v == 0));
    assert!(m["edge_counts_by_type"].as_object().unwrap().is_empty());
}

#[test]
fn decide_on_unknown_edge_exits_1() {
    let dir = TempDir::new().unwrap();
    let out =
        run(dir.path(), &["decide", "e00000042", "--role", "clinical", "--validator", "v", "--verdict", "accept"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("not found"), "{}", stderr(&out));
}

#[test]
fn json_errors_go_to_stdout() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["--json", "explain", "e00000001"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["error"]["kind"], "not_found");
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("Usage"));
    let out = run(dir.path(), &["queue", "--role", "astrologer"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["--version"]).status.code(), Some(0));
}

#[test]
fn missing_input_file_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["ingest", "/definitely/not/here.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"workflow": {"alpha": 0.5, "alpah": 0.4}}"#).unwrap();
    let out = run(&dir.path().join("s"), &["--config", cfg.to_str().unwrap(), "metrics"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("alpah"), "{}", stderr(&out));

    std::fs::write(&cfg, r#"{"workflow": {"alpha": 2.0}}"#).unwrap();
    let out = run(&dir.path().join("s"), &["--config", cfg.to_str().unwrap(), "metrics"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("workflow"), "{}", stderr(&out));
}

#[test]
fn export_import_export_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    populate(&a);
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    ok(&a, &["export", "--out", first.to_str().unwrap()]);
    ok(&b, &["import", first.to_str().unwrap()]);
    ok(&b, &["export", "--out", second.to_str().unwrap()]);
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    // stdout export carries the same bytes.
    assert_eq!(ok(&b, &["export"]).into_bytes(), std::fs::read(&second).unwrap());
    // Import needs an empty graph.
    assert_eq!(run(&b, &["import", first.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn state_survives_restarts_with_and_without_snapshot() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"snapshot_every": 7}"#).unwrap();
    let state = dir.path().join("s");
    let c = cfg.to_str().unwrap();
    ok(&state, &["--config", c, "concepts"]);
    ok(&state, &["--config", c, "ingest", data("corpus.jsonl").to_str().unwrap()]);
    ok(&state, &["--config", c, "propose", "--mode", "concept"]);
    assert!(state.join("snapshot.json").exists());
    let with_snapshot = ok(&state, &["export"]);
    let queue = ok(&state, &["--json", "queue", "--role", "cultural"]);

    std::fs::remove_file(state.join("snapshot.json")).unwrap();
    assert_eq!(ok(&state, &["export"]), with_snapshot);
    assert_eq!(ok(&state, &["--json", "queue", "--role", "cultural"]), queue);

    // A corrupt snapshot is ignored in favor of the log.
    std::fs::write(state.join("snapshot.json"), "{not json").unwrap();
    assert_eq!(ok(&state, &["export"]), with_snapshot);
}

#[test]
fn ingest_is_idempotent_and_reports_bad_lines() {
    let dir = TempDir::new().unwrap();
    let first = json(dir.path(), &["ingest", data("corpus.jsonl").to_str().unwrap()]);
    assert_eq!(first["accepted"], 10);
    assert_eq!(first["created"].as_array().unwrap().len(), 10);
    let again = json(dir.path(), &["ingest", data("corpus.jsonl").to_str().unwrap()]);
    assert!(again["created"].as_array().unwrap().is_empty());

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"raw_text\": 3}\n").unwrap();
    let r = json(dir.path(), &["ingest", bad.to_str().unwrap()]);
    assert_eq!(r["rejected"], 1);
    assert_eq!(r["issues"][0]["line"], 1);
}

#[test]
fn review_flow_produces_report_and_efficiency() {
    let dir = TempDir::new().unwrap();
    let edge = populate(dir.path());
    let report = ok(dir.path(), &["explain", &edge]);
    assert!(report.starts_with(&format!("Mapping report for {edge}")));
    assert!(report.contains("Status: Accepted"));
    let html = ok(dir.path(), &["explain", &edge, "--html"]);
    assert!(html.starts_with("<!DOCTYPE html>"));
    let bundle = json(dir.path(), &["explain", &edge]);
    assert_eq!(bundle["edge_id"], edge.as_str());

    let eff = json(dir.path(), &["efficiency"]);
    assert_eq!(eff["decisions_used"], 3);
    assert_eq!(eff["accepted_edges"], 1);
    assert_eq!(eff["decisions_per_accepted_edge"], 3.0);

    let m = json(dir.path(), &["metrics"]);
    assert_eq!(m["edge_counts_by_status"]["Accepted"], 1);
    assert!(json(dir.path(), &["coherence"])["semantic_coherence"].is_null());
}

#[test]
fn similarity_flags_reach_the_proposer() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["ingest", data("corpus.jsonl").to_str().unwrap()]);
    let args = ["propose", "--mode", "cross", "--language", "hi", "--target-language", "mr", "--dry-run"];
    let loose = json(dir.path(), &[&["--tau", "0.5"], &args[..]].concat());
    let strict = json(dir.path(), &[&["--tau", "0.85"], &args[..]].concat());
    let n = |v: &Value| v["candidates"].as_array().unwrap().len();
    assert!(n(&loose) > n(&strict), "{} vs {}", n(&loose), n(&strict));
    assert!(loose["edges"].as_array().unwrap().is_empty());
    let one = json(dir.path(), &[&["--tau", "0.5", "--k", "1"], &args[..]].concat());
    assert!(n(&one) <= n(&loose));
    let bad = run(dir.path(), &["--provider", "nope", "propose", "--mode", "intra", "--language", "hi"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn align_places_new_text() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["ingest", data("corpus.jsonl").to_str().unwrap()]);
    let exact = json(dir.path(), &["align", "  bahut tension hai ", "--language", "hi"]);
    assert_eq!(exact["outcome"], "exact");
    let other = json(dir.path(), &["--tau-align", "1.0", "align", "pet mein gas", "--language", "hi"]);
    assert_eq!(other["outcome"], "provisional");
}

#[test]
fn agreement_thresholds_and_simulation() {
    let dir = TempDir::new().unwrap();
    let labels = dir.path().join("labels.json");
    std::fs::write(
        &labels,
        r#"[{"annotator": "a", "labels": ["x", "x", "y", "y"]},
            {"annotator": "b", "labels": ["x", "x", "y", "x"]}]"#,
    )
    .unwrap();
    let k = json(dir.path(), &["agreement", labels.to_str().unwrap()]);
    assert!((k["kappa"].as_f64().unwrap() - 0.5).abs() < 1e-12);

    let t = json(dir.path(), &["thresholds"]);
    assert_eq!(t["previous"], t["tau"]);

    let sim = dir.path().join("sim.json");
    std::fs::write(&sim, r#"{"seed": 3, "true_edge_set": [], "validator_accuracy": 1.0, "policy": "active"}"#).unwrap();
    ok(dir.path(), &["ingest", data("corpus.jsonl").to_str().unwrap()]);
    let log = std::fs::read(dir.path().join("events.jsonl")).unwrap();
    let a = ok(dir.path(), &["--json", "simulate", sim.to_str().unwrap()]);
    let b = ok(dir.path(), &["--json", "simulate", sim.to_str().unwrap()]);
    assert_eq!(a, b);
    let report: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(report["accepted_edges"], 0);
    assert_eq!(std::fs::read(dir.path().join("events.jsonl")).unwrap(), log);
}
