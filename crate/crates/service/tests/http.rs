use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use idiom_graph_core::engine::{Engine, Services};
use idiom_graph_core::fixtures::add_bundled_concepts;
use idiom_graph_service::http::{router, AppState, IDEMPOTENCY_HEADER, REPLAYED_HEADER};
use idiom_graph_service::store::{Store, EVENTS_FILE};
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

const CORPUS: &str = include_str!("data/corpus.jsonl");

fn app_with(dir: &Path, tokens: &[(&str, &str)]) -> Router {
    let store = Store::open(dir, Services::default(), 100).unwrap();
    let tokens: BTreeMap<String, String> = tokens.iter().map(|(t, v)| (t.to_string(), v.to_string())).collect();
    router(AppState::new(store, tokens))
}

fn app(dir: &Path) -> Router {
    app_with(dir, &[])
}

struct Resp {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    text: String,
}

impl Resp {
    fn json(&self) -> Value {
        serde_json::from_str(&self.text).unwrap_or_else(|e| panic!("{e}: {}", self.text))
    }
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<String>, headers: &[(&str, &str)]) -> Resp {
    let mut req = Request::builder().method(method).uri(uri);
    for (k, v) in headers {
        req = req.header(*k, *v);
    }
    let resp = app.clone().oneshot(req.body(body.map(Body::from).unwrap_or_else(Body::empty)).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    Resp { status, headers, text: String::from_utf8(bytes.to_vec()).unwrap() }
}

async fn get(app: &Router, uri: &str) -> Resp {
    send(app, "GET", uri, None, &[]).await
}

async fn post(app: &Router, uri: &str, body: impl Into<String>) -> Resp {
    send(app, "POST", uri, Some(body.into()), &[]).await
}

fn concepts_document() -> String {
    let mut e = Engine::new(Services::default());
    add_bundled_concepts(&mut e).unwrap();
    e.export_json()
}

/// Concepts, corpus and concept proposals, all queued.
async fn seeded(app: &Router) {
    assert_eq!(post(app, "/graph/import", concepts_document()).await.status, StatusCode::OK);
    let r = post(app, "/corpus/ingest", CORPUS).await;
    assert_eq!(r.json()["accepted"], 10);
    let r = post(app, "/candidates/propose", json!({"mode": "concept"}).to_string()).await;
    assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    assert_eq!(r.json()["enqueued"].as_array().unwrap().len(), 11);
}

fn decision(edge: &str, role: &str, verdict: &str) -> String {
    json!({"edge_id": edge, "validator_id": format!("v-{role}"), "role": role, "verdict": verdict}).to_string()
}

async fn top_edge(app: &Router) -> String {
    let q = get(app, "/queue?role=clinical&batch_size=1").await.json();
    q[0]["item"]["edge_id"].as_str().unwrap().to_owned()
}

fn log_bytes(dir: &Path) -> Vec<u8> {
    std::fs::read(dir.join(EVENTS_FILE)).unwrap_or_default()
}

#[tokio::test]
async fn health_on_empty_state() {
    let dir = TempDir::new().unwrap();
    let h = get(&app(dir.path()), "/health").await;
    assert_eq!(h.status, StatusCode::OK);
    let v = h.json();
    assert_eq!(v["status"], "ok");
    for k in ["sequence", "expressions", "concepts", "edges", "queued"] {
        assert_eq!(v[k], 0, "{k}");
    }
}

#[tokio::test]
async fn review_flow_over_http() {
    let dir = TempDir::new().unwrap();
    let app = app(dir.path());
    seeded(&app).await;

    let batch = get(&app, "/queue?role=clinical&batch_size=2").await;
    assert_eq!(batch.status, StatusCode::OK);
    let batch = batch.json();
    let items = batch.as_array().unwrap();
    assert!(!items.is_empty() && items.len() <= 2);
    assert_eq!(items[0]["edge"]["status"], "UnderValidation");
    assert!(items[0]["bundle_preview"]["clinical"].as_str().unwrap().contains("not diagnostic"));

    let edge = top_edge(&app).await;
    for role in ["linguistic", "clinical", "cultural"] {
        let r = post(&app, "/decisions", decision(&edge, role, "accept")).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    }
    let r = post(&app, "/decisions", decision(&edge, "clinical", "accept")).await;
    assert_eq!(r.status, StatusCode::CONFLICT, "settled edges take no decisions");

    let bundle = get(&app, &format!("/edges/{edge}/explanation")).await.json();
    assert_eq!(bundle["edge_id"], edge.as_str());
    assert!(!bundle["linguistic"].as_str().unwrap().is_empty());

    let report = get(&app, &format!("/edges/{edge}/report")).await;
    assert_eq!(report.status, StatusCode::OK);
    assert!(report.headers[header::CONTENT_TYPE].to_str().unwrap().starts_with("text/html"));
    assert!(report.text.starts_with("<!DOCTYPE html>"));

    let m = get(&app, "/metrics").await.json();
    assert_eq!(m["efficiency"]["decisions_used"], 3);
    assert_eq!(m["connectivity"]["edge_counts_by_status"]["Accepted"], 1);

    let a =
        post(&app, "/expressions/align", json!({"surface_text": "bahut tension hai", "language": "hi"}).to_string())
            .await
            .json();
    assert_eq!(a["outcome"], "exact");

    let before = log_bytes(dir.path());
    let dry = post(
        &app,
        "/candidates/propose",
        json!({"mode": "cross", "params": {"language": "hi", "target_language": "mr", "tau": 0.6}, "dry_run": true})
            .to_string(),
    )
    .await
    .json();
    assert!(!dry["candidates"].as_array().unwrap().is_empty());
    assert!(dry["edges"].as_array().unwrap().is_empty());
    assert_eq!(dry["embedded"], 10);
    assert_eq!(log_bytes(dir.path()), before, "dry runs write nothing");
    assert_eq!(get(&app, "/health").await.json()["edges"], 11);
}

#[tokio::test]
async fn adjudication_over_http() {
    let dir = TempDir::new().unwrap();
    let app = app(dir.path());
    seeded(&app).await;
    let edge = top_edge(&app).await;
    post(&app, "/decisions", decision(&edge, "linguistic", "accept")).await;
    post(&app, "/decisions", decision(&edge, "cultural", "accept")).await;
    let r = post(&app, "/decisions", decision(&edge, "clinical", "reject")).await.json();
    assert_eq!(r["edge"]["status"], "Adjudication");

    let bad = post(&app, &format!("/adjudications/{edge}"), json!({"outcome": "retain_parallel"}).to_string()).await;
    assert_eq!(bad.status, StatusCode::UNPROCESSABLE_ENTITY);
    let ok = post(
        &app,
        &format!("/adjudications/{edge}"),
        json!({"outcome": "consensus_accept", "note": "panel agreed"}).to_string(),
    )
    .await;
    assert_eq!(ok.status, StatusCode::OK, "{}", ok.text);
    assert_eq!(ok.json()[0]["status"], "Accepted");
    let gone = post(&app, "/adjudications/e09999999", json!({"outcome": "consensus_accept"}).to_string()).await;
    assert_eq!(gone.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn retries_with_an_idempotency_key_replay() {
    let dir = TempDir::new().unwrap();
    let app = app(dir.path());
    seeded(&app).await;
    let edge = top_edge(&app).await;
    let body = decision(&edge, "clinical", "accept");
    let first = send(&app, "POST", "/decisions", Some(body.clone()), &[(IDEMPOTENCY_HEADER, "k-1")]).await;
    assert_eq!(first.status, StatusCode::OK);
    assert!(first.headers.get(REPLAYED_HEADER).is_none());
    let log = log_bytes(dir.path());

    let again = send(&app, "POST", "/decisions", Some(body.clone()), &[(IDEMPOTENCY_HEADER, "k-1")]).await;
    assert_eq!(again.status, StatusCode::OK);
    assert_eq!(again.headers[REPLAYED_HEADER], "true");
    assert_eq!(again.text, first.text);
    assert_eq!(log_bytes(dir.path()), log);

    let other = decision(&edge, "linguistic", "accept");
    let clash = send(&app, "POST", "/decisions", Some(other), &[(IDEMPOTENCY_HEADER, "k-1")]).await;
    assert_eq!(clash.status, StatusCode::CONFLICT);
    assert_eq!(clash.json()["error"]["kind"], "idempotency_mismatch");
    assert_eq!(log_bytes(dir.path()), log);

    // Failures are replayed too, without touching the log.
    let missing = decision("e09999999", "clinical", "accept");
    let a = send(&app, "POST", "/decisions", Some(missing.clone()), &[(IDEMPOTENCY_HEADER, "k-2")]).await;
    let b = send(&app, "POST", "/decisions", Some(missing), &[(IDEMPOTENCY_HEADER, "k-2")]).await;
    assert_eq!((a.status, b.status), (StatusCode::NOT_FOUND, StatusCode::NOT_FOUND));
    assert_eq!(b.headers[REPLAYED_HEADER], "true");
    assert_eq!(log_bytes(dir.path()), log);
}

#[tokio::test]
async fn bearer_tokens_bind_validators() {
    let dir = TempDir::new().unwrap();
    let app = app_with(dir.path(), &[("tok-ling", "v-linguistic"), ("tok-clin", "v-clinical")]);
    assert_eq!(get(&app, "/health").await.status, StatusCode::OK);
    assert_eq!(get(&app, "/metrics").await.status, StatusCode::UNAUTHORIZED);
    let wrong = send(&app, "GET", "/metrics", None, &[("authorization", "Bearer nope")]).await;
    assert_eq!(wrong.status, StatusCode::UNAUTHORIZED);

    let auth = [("authorization", "Bearer tok-ling")];
    let r = send(&app, "POST", "/graph/import", Some(concepts_document()), &auth).await;
    assert_eq!(r.status, StatusCode::OK);
    send(&app, "POST", "/corpus/ingest", Some(CORPUS.into()), &auth).await;
    let r = send(&app, "POST", "/candidates/propose", Some(json!({"mode": "concept"}).to_string()), &auth).await;
    assert_eq!(r.status, StatusCode::OK);
    let q = send(&app, "GET", "/queue?role=linguistic&batch_size=1", None, &auth).await.json();
    let edge = q[0]["item"]["edge_id"].as_str().unwrap().to_owned();

    let log = log_bytes(dir.path());
    let forged = send(&app, "POST", "/decisions", Some(decision(&edge, "clinical", "accept")), &auth).await;
    assert_eq!(forged.status, StatusCode::FORBIDDEN);
    assert_eq!(log_bytes(dir.path()), log);
    let own = send(&app, "POST", "/decisions", Some(decision(&edge, "linguistic", "accept")), &auth).await;
    assert_eq!(own.status, StatusCode::OK);
}

#[tokio::test]
async fn failed_requests_leave_the_log_unchanged() {
    let dir = TempDir::new().unwrap();
    let app = app(dir.path());
    seeded(&app).await;
    let edge = top_edge(&app).await;
    let log = log_bytes(dir.path());

    let cases = [
        ("/decisions", decision("e09999999", "clinical", "accept"), StatusCode::NOT_FOUND),
        ("/decisions", decision(&edge, "clinical", "modify"), StatusCode::UNPROCESSABLE_ENTITY),
        ("/decisions", "{\"edge_id\": 7}".to_owned(), StatusCode::UNPROCESSABLE_ENTITY),
        ("/graph/import", concepts_document(), StatusCode::CONFLICT),
        ("/candidates/propose", json!({"mode": "intra"}).to_string(), StatusCode::UNPROCESSABLE_ENTITY),
        ("/candidates/propose", json!({"mode": "sideways"}).to_string(), StatusCode::UNPROCESSABLE_ENTITY),
        (
            "/expressions/align",
            json!({"surface_text": "x", "language": "hi", "provider_id": "nope"}).to_string(),
            StatusCode::NOT_FOUND,
        ),
        ("/simulate", json!({"seed": 1}).to_string(), StatusCode::UNPROCESSABLE_ENTITY),
    ];
    for (uri, body, want) in cases {
        let r = post(&app, uri, body.clone()).await;
        assert_eq!(r.status, want, "{uri} {body}: {}", r.text);
        assert!(r.json()["error"]["message"].is_string());
        assert_eq!(log_bytes(dir.path()), log, "{uri} {body}");
    }
    let named = post(&app, "/decisions", "{\"edge_id\": 7}").await.json();
    assert!(named["error"]["message"].as_str().unwrap().contains("edge_id"));
    assert_eq!(get(&app, "/queue?role=astrologer").await.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(get(&app, "/edges/e09999999/explanation").await.status, StatusCode::NOT_FOUND);
    assert_eq!(get(&app, "/edges/e09999999/report").await.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn restart_restores_identical_state() {
    let dir = TempDir::new().unwrap();
    let (export, queue, metrics) = {
        let app = app(dir.path());
        seeded(&app).await;
        let edge = top_edge(&app).await;
        for role in ["linguistic", "clinical", "cultural"] {
            post(&app, "/decisions", decision(&edge, role, "accept")).await;
        }
        (
            get(&app, "/graph/export").await.text,
            get(&app, "/queue?role=cultural&batch_size=5").await.text,
            get(&app, "/metrics").await.text,
        )
    };
    let app = app(dir.path());
    assert_eq!(get(&app, "/graph/export").await.text, export);
    assert_eq!(get(&app, "/queue?role=cultural&batch_size=5").await.text, queue);
    assert_eq!(get(&app, "/metrics").await.text, metrics);

    // An exported log replays into a fresh instance with the same export.
    let fresh = TempDir::new().unwrap();
    std::fs::copy(dir.path().join(EVENTS_FILE), fresh.path().join(EVENTS_FILE)).unwrap();
    assert_eq!(get(&app_with(fresh.path(), &[]), "/graph/export").await.text, export);
}

#[tokio::test]
async fn snapshot_reads_see_concurrent_writes_atomically() {
    let dir = TempDir::new().unwrap();
    let app = app(dir.path());
    seeded(&app).await;
    let q = get(&app, "/queue?role=clinical&batch_size=50").await.json();
    let edges: Vec<String> =
        q.as_array().unwrap().iter().map(|e| e["item"]["edge_id"].as_str().unwrap().to_owned()).collect();
    let tasks: Vec<_> = edges
        .iter()
        .flat_map(|e| ["linguistic", "clinical", "cultural"].map(|r| (e.clone(), r)))
        .map(|(e, r)| {
            let app = app.clone();
            tokio::spawn(async move { post(&app, "/decisions", decision(&e, r, "accept")).await.status })
        })
        .collect();
    let readers: Vec<_> = (0..10)
        .map(|_| {
            let app = app.clone();
            tokio::spawn(async move { get(&app, "/health").await.status })
        })
        .collect();
    for t in tasks.into_iter().chain(readers) {
        assert_eq!(t.await.unwrap(), StatusCode::OK);
    }
    let m = get(&app, "/metrics").await.json();
    assert_eq!(m["efficiency"]["decisions_used"], 3 * edges.len());
    assert_eq!(m["connectivity"]["edge_counts_by_status"]["Accepted"], edges.len());
}

#[tokio::test]
async fn simulation_is_deterministic_and_read_only() {
    let dir = TempDir::new().unwrap();
    let app = app(dir.path());
    seeded(&app).await;
    let log = log_bytes(dir.path());
    let cfg = json!({"seed": 4, "true_edge_set": [], "validator_accuracy": 0.9, "policy": "random"}).to_string();
    let a = post(&app, "/simulate", cfg.clone()).await;
    let b = post(&app, "/simulate", cfg.clone()).await;
    assert_eq!(a.status, StatusCode::OK, "{}", a.text);
    assert_eq!(a.text, b.text);
    assert!(a.json()["reviewed_edges"].as_u64().unwrap() > 0);
    // The seeded edges are all queued, so the state source has no candidates.
    let s = post(&app, "/simulate?source=state", cfg).await.json();
    assert_eq!(s["reviewed_edges"], 0);
    assert_eq!(log_bytes(dir.path()), log);
}

#[tokio::test]
async fn shared_state_handle_is_cloneable() {
    let dir = TempDir::new().unwrap();
    let store = Store::open(dir.path(), Services::default(), 100).unwrap();
    let state: Arc<AppState> = AppState::new(store, BTreeMap::new());
    let (a, b) = (router(Arc::clone(&state)), router(state));
    post(&a, "/graph/import", concepts_document()).await;
    assert_eq!(get(&b, "/health").await.json()["concepts"], 10);
}
