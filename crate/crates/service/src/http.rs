use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use idiom_graph_core::annotation::ingest_corpus;
use idiom_graph_core::engine::{AlignRequest, Engine, EventRecord};
use idiom_graph_core::ids::EdgeId;
use idiom_graph_core::metrics::SimulationConfig;
use idiom_graph_core::workflow::Role;
use idiom_graph_core::Error as CoreError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::Mutex;

use crate::error::{parse_json, Result, ServiceError};
use crate::ops::{self, AdjudicationRequest, DecisionRequest, ProposeRequest, SimulationSource};
use crate::store::Store;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";
pub const REPLAYED_HEADER: &str = "idempotent-replayed";

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), axum::Json(self.to_json())).into_response()
    }
}

/// What readers see: replaced wholesale after each write.
#[derive(Clone)]
struct View {
    engine: Arc<Engine>,
    history: Arc<Vec<EventRecord>>,
}

#[derive(Clone)]
struct Cached {
    route: String,
    body: Bytes,
    status: StatusCode,
    json: Value,
}

struct Writer {
    store: Store,
    seen: HashMap<String, Cached>,
}

pub struct AppState {
    writer: Mutex<Writer>,
    view: RwLock<View>,
    tokens: BTreeMap<String, String>,
}

impl AppState {
    /// `tokens` maps bearer tokens to validator ids; empty disables auth.
    pub fn new(store: Store, tokens: BTreeMap<String, String>) -> Arc<Self> {
        let view = View { engine: store.engine(), history: store.history() };
        Arc::new(Self { writer: Mutex::new(Writer { store, seen: HashMap::new() }), view: RwLock::new(view), tokens })
    }

    fn view(&self) -> View {
        self.view.read().expect("view lock").clone()
    }

    /// The validator behind the request's bearer token, or `None` when
    /// authentication is off.
    fn authorize(&self, headers: &HeaderMap) -> Result<Option<&str>> {
        if self.tokens.is_empty() {
            return Ok(None);
        }
        let token = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or(ServiceError::Unauthorized)?;
        self.tokens.get(token.trim()).map(|v| Some(v.as_str())).ok_or(ServiceError::Unauthorized)
    }

    /// Serialized write with idempotency-key handling. Failed requests
    /// leave the log untouched (see [`Store::mutate`]).
    async fn write<T: Serialize>(
        &self,
        headers: &HeaderMap,
        route: String,
        body: Bytes,
        f: impl FnOnce(&mut Engine) -> idiom_graph_core::Result<T>,
    ) -> Response {
        let key = headers.get(IDEMPOTENCY_HEADER).and_then(|v| v.to_str().ok()).map(str::to_owned);
        let mut w = self.writer.lock().await;
        if let Some(k) = &key {
            if let Some(c) = w.seen.get(k) {
                if c.route != route || c.body != body {
                    return ServiceError::IdempotencyMismatch(k.clone()).into_response();
                }
                let mut resp = (c.status, axum::Json(c.json.clone())).into_response();
                resp.headers_mut().insert(REPLAYED_HEADER, HeaderValue::from_static("true"));
                return resp;
            }
        }
        let (status, json) = match w.store.mutate(f) {
            Ok(v) => (StatusCode::OK, serde_json::to_value(v).expect("responses serialize")),
            Err(e) => (e.status(), e.to_json()),
        };
        *self.view.write().expect("view lock") = View { engine: w.store.engine(), history: w.store.history() };
        // Server-side failures may be transient, so a retry runs again.
        if let Some(k) = key.filter(|_| !status.is_server_error()) {
            w.seen.insert(k, Cached { route, body, status, json: json.clone() });
        }
        (status, axum::Json(json)).into_response()
    }
}

fn route_id(method: &Method, path: &str) -> String {
    format!("{method} {path}")
}

fn body_text(body: &Bytes) -> Result<&str> {
    std::str::from_utf8(body)
        .map_err(|e| CoreError::Parse { location: "request body".into(), message: e.to_string() }.into())
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T> {
    parse_json(body_text(body)?, "request body")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/metrics", get(metrics))
        .route("/graph/export", get(export))
        .route("/graph/import", post(import))
        .route("/corpus/ingest", post(ingest))
        .route("/expressions/align", post(align))
        .route("/candidates/propose", post(propose))
        .route("/queue", get(queue))
        .route("/decisions", post(decide))
        .route("/adjudications/{edge_id}", post(adjudicate))
        .route("/edges/{id}/explanation", get(explanation))
        .route("/edges/{id}/report", get(report))
        .route("/simulate", post(simulate))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health(State(s): State<Arc<AppState>>) -> Response {
    let e = s.view().engine;
    let g = e.graph();
    axum::Json(json!({
        "status": "ok",
        "sequence": e.sequence(),
        "expressions": g.expressions().count(),
        "concepts": g.concepts().count(),
        "edges": g.edge_count(),
        "queued": e.workflow().queue().count(),
    }))
    .into_response()
}

async fn metrics(State(s): State<Arc<AppState>>, headers: HeaderMap) -> Result<Response> {
    s.authorize(&headers)?;
    let v = s.view();
    Ok(axum::Json(ops::metrics(&v.engine, &v.history)?).into_response())
}

async fn export(State(s): State<Arc<AppState>>, headers: HeaderMap) -> Result<Response> {
    s.authorize(&headers)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], s.view().engine.export_json()).into_response())
}

async fn import(State(s): State<Arc<AppState>>, method: Method, headers: HeaderMap, body: Bytes) -> Result<Response> {
    s.authorize(&headers)?;
    let text = body_text(&body)?.to_owned();
    Ok(s.write(&headers, route_id(&method, "/graph/import"), body, move |e| {
        e.import_json(&text)?;
        Ok(json!({ "nodes": e.graph().node_count(), "edges": e.graph().edge_count() }))
    })
    .await)
}

async fn ingest(State(s): State<Arc<AppState>>, method: Method, headers: HeaderMap, body: Bytes) -> Result<Response> {
    s.authorize(&headers)?;
    let text = body_text(&body)?.to_owned();
    Ok(s.write(&headers, route_id(&method, "/corpus/ingest"), body, move |e| ingest_corpus(e, text.as_bytes())).await)
}

async fn align(State(s): State<Arc<AppState>>, method: Method, headers: HeaderMap, body: Bytes) -> Result<Response> {
    s.authorize(&headers)?;
    let req: AlignRequest = parse_body(&body)?;
    Ok(s.write(&headers, route_id(&method, "/expressions/align"), body, move |e| e.align_new_expression(req)).await)
}

async fn propose(State(s): State<Arc<AppState>>, method: Method, headers: HeaderMap, body: Bytes) -> Result<Response> {
    s.authorize(&headers)?;
    let req: ProposeRequest = parse_body(&body)?;
    if req.dry_run {
        let mut scratch = (*s.view().engine).clone();
        return Ok(axum::Json(ops::propose(&mut scratch, &req)?).into_response());
    }
    Ok(s.write(&headers, route_id(&method, "/candidates/propose"), body, move |e| ops::propose(e, &req)).await)
}

#[derive(Deserialize)]
struct QueueQuery {
    role: String,
    batch_size: Option<usize>,
}

async fn queue(State(s): State<Arc<AppState>>, headers: HeaderMap, Query(q): Query<QueueQuery>) -> Result<Response> {
    s.authorize(&headers)?;
    let role: Role = q.role.parse()?;
    let entries = ops::queue(&s.view().engine, role, q.batch_size.unwrap_or(10))?;
    Ok(axum::Json(entries).into_response())
}

async fn decide(State(s): State<Arc<AppState>>, method: Method, headers: HeaderMap, body: Bytes) -> Result<Response> {
    let caller = s.authorize(&headers)?;
    let req: DecisionRequest = parse_body(&body)?;
    if let Some(v) = caller {
        if v != req.validator_id {
            return Err(ServiceError::Forbidden(format!(
                "token belongs to {v}, decision is signed by {}",
                req.validator_id
            )));
        }
    }
    Ok(s.write(&headers, route_id(&method, "/decisions"), body, move |e| ops::decide(e, req)).await)
}

async fn adjudicate(
    State(s): State<Arc<AppState>>,
    Path(edge_id): Path<String>,
    method: Method,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response> {
    s.authorize(&headers)?;
    let req: AdjudicationRequest = parse_body(&body)?;
    let route = route_id(&method, &format!("/adjudications/{edge_id}"));
    let resolution = req.resolution(EdgeId::from(edge_id));
    Ok(s.write(&headers, route, body, move |e| e.resolve_adjudication(resolution)).await)
}

async fn explanation(State(s): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>) -> Result<Response> {
    s.authorize(&headers)?;
    Ok(axum::Json(s.view().engine.explanation(&EdgeId::from(id))?).into_response())
}

async fn report(State(s): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>) -> Result<Response> {
    s.authorize(&headers)?;
    let r = s.view().engine.report(&EdgeId::from(id))?;
    Ok(([(header::CONTENT_TYPE, "text/html; charset=utf-8")], r.html).into_response())
}

#[derive(Deserialize)]
struct SimulateQuery {
    #[serde(default)]
    source: SimulationSource,
}

async fn simulate(
    State(s): State<Arc<AppState>>,
    headers: HeaderMap,
    Query(q): Query<SimulateQuery>,
    body: Bytes,
) -> Result<Response> {
    s.authorize(&headers)?;
    let config: SimulationConfig = parse_body(&body)?;
    let engine = s.view().engine;
    let report = tokio::task::spawn_blocking(move || ops::simulate(&engine, &config, q.source))
        .await
        .map_err(|e| ServiceError::Io { context: "simulation task".into(), source: std::io::Error::other(e) })??;
    Ok(axum::Json(report).into_response())
}
