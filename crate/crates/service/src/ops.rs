//! Request and response shapes shared by the HTTP API and the command line.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use idiom_graph_core::align::{CandidateEdge, EmbeddingRecord};
use idiom_graph_core::engine::{Engine, EventRecord};
use idiom_graph_core::explain::ExplanationBundle;
use idiom_graph_core::fixtures::simulation_fixture;
use idiom_graph_core::graph::{AdjudicationOutcome, Edge, EdgeStatus};
use idiom_graph_core::ids::{EdgeId, NodeId};
use idiom_graph_core::metrics::{
    hitl_efficiency, simulate_validation, EfficiencyReport, GraphMetrics, SimulationConfig,
};
use idiom_graph_core::workflow::{Modification, QueueItem, Resolution, Role, ValidationDecision, Verdict};
use idiom_graph_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposeMode {
    Intra,
    Cross,
    Concept,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposeParams {
    /// Intra: the language. Cross: the first language.
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub target_language: Option<String>,
    /// Concept mode for one expression; all active expressions when absent.
    #[serde(default)]
    pub node_id: Option<NodeId>,
    #[serde(default)]
    pub provider_id: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub tau: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposeRequest {
    pub mode: ProposeMode,
    #[serde(default)]
    pub params: ProposeParams,
    /// Return candidates without persisting anything. Callers run these on
    /// a scratch copy of the engine.
    #[serde(default)]
    pub dry_run: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProposeResponse {
    pub candidates: Vec<CandidateEdge>,
    /// Edges backing the candidates; empty on a dry run.
    pub edges: Vec<Edge>,
    pub enqueued: Vec<QueueItem>,
    /// Vectors computed for expressions that had none under the provider.
    pub embedded: usize,
    /// Per-expression proposer failures that did not stop the others.
    pub errors: Vec<String>,
}

fn required<'a>(v: &'a Option<String>, name: &str) -> Result<&'a str> {
    v.as_deref().ok_or_else(|| Error::Validation(format!("params.{name} is required for this mode")))
}

/// Generates candidates and, unless dry-running, materializes them and
/// queues the new ones for review. Similarity modes first embed expressions
/// that lack a vector, when the provider can compute one.
pub fn propose(engine: &mut Engine, req: &ProposeRequest) -> Result<ProposeResponse> {
    let p = &req.params;
    let params = engine.similarity_params(p.provider_id.as_deref(), p.k, p.tau);
    let mut errors = Vec::new();
    let similarity = matches!(req.mode, ProposeMode::Intra | ProposeMode::Cross);
    let computable = engine.services().provider(&params.provider_id).is_ok();
    if similarity && !computable && engine.embeddings().space(&params.provider_id).is_none() {
        return Err(Error::NotFound(format!("embedding provider {}", params.provider_id)));
    }
    let embedded = if similarity && computable { engine.embed_expressions(&params.provider_id)? } else { 0 };
    let candidates = match req.mode {
        ProposeMode::Intra => engine.propose_intra_lingual(required(&p.language, "language")?, &params)?,
        ProposeMode::Cross => engine.propose_cross_lingual(
            required(&p.language, "language")?,
            required(&p.target_language, "target_language")?,
            &params,
        )?,
        ProposeMode::Concept => match &p.node_id {
            Some(id) => engine.propose_expression_concept(id)?,
            None => {
                let (c, errs) = engine.propose_all_concepts();
                errors = errs.iter().map(ToString::to_string).collect();
                c
            }
        },
    };
    if req.dry_run {
        return Ok(ProposeResponse { candidates, embedded, errors, ..Default::default() });
    }
    let (edges, enqueued) = engine.transaction(|eng| {
        let edges = eng.materialize(&candidates)?;
        let mut queued = Vec::new();
        for e in edges.iter().filter(|e| e.status == EdgeStatus::Proposed) {
            queued.push(eng.enqueue(&e.id)?);
        }
        let edges = edges.iter().map(|e| eng.graph().edge(&e.id).cloned().unwrap_or_else(|| e.clone())).collect();
        Ok((edges, queued))
    })?;
    Ok(ProposeResponse { candidates, edges, enqueued, embedded, errors })
}

/// A decision as submitted by a client; the timestamp defaults to now.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub edge_id: EdgeId,
    pub validator_id: String,
    pub role: Role,
    pub verdict: Verdict,
    #[serde(default)]
    pub modification: Option<Modification>,
    #[serde(default)]
    pub comment: String,
    #[serde(default)]
    pub decided_at: Option<DateTime<Utc>>,
}

impl DecisionRequest {
    pub fn into_decision(self, now: DateTime<Utc>) -> ValidationDecision {
        ValidationDecision {
            edge_id: self.edge_id,
            validator_id: self.validator_id,
            role: self.role,
            verdict: self.verdict,
            modification: self.modification,
            comment: self.comment,
            decided_at: self.decided_at.unwrap_or(now),
        }
    }
}

pub fn decide(engine: &mut Engine, req: DecisionRequest) -> Result<idiom_graph_core::workflow::DecisionOutcome> {
    let now = engine.services().clock.now();
    engine.submit_decision(req.into_decision(now))
}

/// Adjudication body; the edge comes from the path or argument.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjudicationRequest {
    pub outcome: AdjudicationOutcome,
    #[serde(default)]
    pub parallel_edges: Vec<EdgeId>,
    #[serde(default)]
    pub reasons: Vec<String>,
    #[serde(default)]
    pub note: Option<String>,
}

impl AdjudicationRequest {
    pub fn resolution(self, edge_id: EdgeId) -> Resolution {
        Resolution {
            edge_id,
            outcome: self.outcome,
            parallel_edges: self.parallel_edges,
            reasons: self.reasons,
            note: self.note,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub item: QueueItem,
    pub edge: Edge,
    /// The bundle the edge would get now; absent if one cannot be built.
    pub bundle_preview: Option<ExplanationBundle>,
}

pub fn queue(engine: &Engine, role: Role, batch_size: usize) -> Result<Vec<QueueEntry>> {
    engine
        .next_batch(role, batch_size)?
        .into_iter()
        .map(|item| {
            let edge = engine
                .graph()
                .edge(&item.edge_id)
                .cloned()
                .ok_or_else(|| Error::NotFound(format!("edge {}", item.edge_id)))?;
            let bundle_preview = engine.preview_bundle(&item.edge_id).ok();
            Ok(QueueEntry { item, edge, bundle_preview })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsResponse {
    pub connectivity: GraphMetrics,
    /// Against the default provider; null when undefined or unavailable.
    pub semantic_coherence: Option<f64>,
    pub efficiency: EfficiencyReport,
}

pub fn metrics(engine: &Engine, history: &[EventRecord]) -> Result<MetricsResponse> {
    Ok(MetricsResponse {
        connectivity: engine.connectivity(),
        semantic_coherence: engine.semantic_coherence(&engine.services().default_provider).ok().flatten(),
        efficiency: hitl_efficiency(history, None)?,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationSource {
    /// The bundled 200-candidate fixture.
    #[default]
    Fixture,
    /// Proposed edges of the current state.
    State,
}

/// Runs the review simulator without touching `engine`.
pub fn simulate(engine: &Engine, config: &SimulationConfig, source: SimulationSource) -> Result<EfficiencyReport> {
    match source {
        SimulationSource::Fixture => {
            let f = simulation_fixture(engine.services().clone())?;
            simulate_validation(&f.engine, config, &f.candidates)
        }
        SimulationSource::State => {
            let candidates: Vec<CandidateEdge> = engine
                .graph()
                .edges()
                .filter(|e| e.status == EdgeStatus::Proposed)
                .map(|e| CandidateEdge {
                    src: e.src.clone(),
                    dst: e.dst.clone(),
                    edge_type: e.edge_type,
                    score: e.model_confidence,
                    rationale: e.rationale.clone(),
                    proposer_id: e.proposer_id.clone().unwrap_or_default(),
                })
                .collect();
            simulate_validation(engine, config, &candidates)
        }
    }
}

/// Registers JSON Lines embedding records in one step.
pub fn import_embeddings(engine: &mut Engine, text: &str) -> Result<usize> {
    let records = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<EmbeddingRecord>(l)
                .map_err(|e| Error::Parse { location: format!("line {}", i + 1), message: e.to_string() })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = records.len();
    engine.transaction(|eng| records.into_iter().try_for_each(|r| eng.register_embedding(r)))?;
    Ok(n)
}

/// Ground truth as a JSON array of candidate ids.
pub fn parse_truth(text: &str) -> Result<BTreeSet<String>> {
    serde_json::from_str(text).map_err(|e| Error::Parse { location: "truth file".into(), message: e.to_string() })
}
