//! Event-sourced facade over the graph, the review workflow and the
//! embedding store. Every mutation is an [`Event`] applied through one
//! reducer and appended to the log, so replaying the log rebuilds the state.

mod clock;
mod events;

pub use clock::{Clock, FixedClock, SystemClock};
pub use events::{parse_event_log, Event, EventRecord};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::align::{
    cosine, normalized_score, propose_cross_lingual, propose_intra_lingual, CandidateEdge, EmbeddingProvider,
    EmbeddingRecord, EmbeddingStore, HashedTokenProvider, LexiconProposer, MappingProposer, SimilarityParams,
    HASHED_PROVIDER_ID,
};
use crate::annotation::AnnotationRecord;
use crate::error::{Error, Result};
use crate::explain::{generate_bundle, render_report, ExplainContext, ExplanationBundle, Report, RuleSet};
use crate::graph::{
    Alternative, Edge, EdgeStatus, EdgeType, Graph, GraphDocument, NewConcept, NewEdge, NewExpression, Node, NodeRef,
    NodeStatus, Prepared, Provenance, Transition,
};
use crate::ids::{EdgeId, NodeId};
use crate::metrics::{connectivity_metrics, semantic_coherence, GraphMetrics};
use crate::par::Execution;
use crate::text::{normalize, normalize_language};
use crate::workflow::{
    update_thresholds, DecisionOutcome, QueueItem, Resolution, Role, ValidationDecision, Workflow, WorkflowConfig,
};

/// Pluggable collaborators. None of them is part of the event log, so a log
/// replays identically under any configuration.
#[derive(Clone)]
pub struct Services {
    providers: BTreeMap<String, Arc<dyn EmbeddingProvider>>,
    pub default_provider: String,
    pub proposer: Arc<dyn MappingProposer>,
    pub rules: Arc<RuleSet>,
    pub clock: Arc<dyn Clock>,
    pub exec: Execution,
    /// Validated examples listed per bundle.
    pub nearest_k: usize,
    /// Default neighbor count for similarity proposals.
    pub k: usize,
    /// Normalized similarity at which a new text aligns to an existing node.
    pub tau_align: f64,
}

impl Default for Services {
    fn default() -> Self {
        let hashed: Arc<dyn EmbeddingProvider> = Arc::new(HashedTokenProvider::default());
        Self {
            providers: BTreeMap::from([(HASHED_PROVIDER_ID.to_owned(), hashed)]),
            default_provider: HASHED_PROVIDER_ID.to_owned(),
            proposer: Arc::new(LexiconProposer::bundled()),
            rules: Arc::new(RuleSet::bundled()),
            clock: Arc::new(SystemClock),
            exec: Execution::default(),
            nearest_k: 3,
            k: 5,
            tau_align: 0.85,
        }
    }
}

impl fmt::Debug for Services {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Services")
            .field("providers", &self.providers.keys().collect::<Vec<_>>())
            .field("default_provider", &self.default_provider)
            .field("proposer", &self.proposer.id())
            .field("rules", &self.rules.len())
            .field("exec", &self.exec)
            .field("nearest_k", &self.nearest_k)
            .field("k", &self.k)
            .field("tau_align", &self.tau_align)
            .finish()
    }
}

impl Services {
    pub fn with_clock(mut self, clock: impl Clock + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    pub fn with_exec(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Registers (or replaces) a provider under its own id.
    pub fn with_provider(mut self, provider: Arc<dyn EmbeddingProvider>) -> Self {
        self.providers.insert(provider.id().to_owned(), provider);
        self
    }

    pub fn provider(&self, id: &str) -> Result<&Arc<dyn EmbeddingProvider>> {
        self.providers.get(id).ok_or_else(|| Error::NotFound(format!("embedding provider {id}")))
    }

    pub fn provider_ids(&self) -> impl Iterator<Item = &str> {
        self.providers.keys().map(String::as_str)
    }
}

/// Serialized state at a given log position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub sequence: u64,
    pub graph: GraphDocument,
    pub transitions: Vec<Transition>,
    pub workflow: Workflow,
    pub embeddings: EmbeddingStore,
}

/// Input for [`Engine::align_new_expression`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignRequest {
    pub surface_text: String,
    pub language: String,
    #[serde(default)]
    pub provider_id: Option<String>,
    #[serde(default)]
    pub gloss: Option<String>,
    #[serde(default)]
    pub annotation: Option<AnnotationRecord>,
    #[serde(default)]
    pub provenance: Option<Provenance>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignOutcome {
    /// The normalized text already exists.
    Exact,
    /// A new node was added and linked to a sufficiently similar one.
    Similar,
    /// Nothing is close enough; the new node awaits annotation.
    Provisional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub outcome: AlignOutcome,
    pub node_id: NodeId,
    pub matched: Option<NodeId>,
    pub similarity: Option<f64>,
    pub candidate: Option<Edge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdUpdate {
    pub previous: f64,
    pub tau: f64,
    pub accepted: usize,
    pub rejected: usize,
}

enum Applied {
    Nothing,
    Node(NodeId),
    Edge(Box<Edge>),
    Queued(QueueItem),
    Decision(Box<DecisionOutcome>),
    Resolved(Vec<Edge>),
}

#[derive(Clone, Debug)]
pub struct Engine {
    graph: Graph,
    workflow: Workflow,
    embeddings: EmbeddingStore,
    log: Vec<EventRecord>,
    base_sequence: u64,
    services: Services,
}

impl Engine {
    pub fn new(services: Services) -> Self {
        Self {
            graph: Graph::new(),
            workflow: Workflow::default(),
            embeddings: EmbeddingStore::default(),
            log: Vec::new(),
            base_sequence: 0,
            services,
        }
    }

    pub fn with_config(services: Services, config: WorkflowConfig) -> Result<Self> {
        let mut engine = Self::new(services);
        engine.set_config(config)?;
        Ok(engine)
    }

    /// Rebuilds an engine from a complete log (sequences 1..=n).
    pub fn replay(services: Services, records: &[EventRecord]) -> Result<Self> {
        let mut engine = Self::new(services);
        engine.apply_all(records)?;
        Ok(engine)
    }

    /// Restores `snapshot` and applies the records that follow it. Records at
    /// or before the snapshot position are skipped.
    pub fn from_snapshot(services: Services, snapshot: Snapshot, records: &[EventRecord]) -> Result<Self> {
        let mut graph = Graph::from_document(snapshot.graph)?;
        graph.restore_transitions(snapshot.transitions);
        snapshot.workflow.config.validate()?;
        let mut engine = Self {
            graph,
            workflow: snapshot.workflow,
            embeddings: snapshot.embeddings,
            log: Vec::new(),
            base_sequence: snapshot.sequence,
            services,
        };
        let tail: Vec<EventRecord> = records.iter().filter(|r| r.sequence > snapshot.sequence).cloned().collect();
        engine.apply_all(&tail)?;
        Ok(engine)
    }

    fn apply_all(&mut self, records: &[EventRecord]) -> Result<()> {
        for r in records {
            let expected = self.sequence() + 1;
            if r.sequence != expected {
                return Err(Error::parse(
                    format!("event {}", r.sequence),
                    format!("sequence gap: expected {expected}"),
                ));
            }
            self.apply(r)
                .map_err(|e| Error::parse(format!("event {} ({})", r.sequence, r.event.kind()), e.to_string()))?;
            self.log.push(r.clone());
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            sequence: self.sequence(),
            graph: self.graph.to_document(),
            transitions: self.graph.transitions().to_vec(),
            workflow: self.workflow.clone(),
            embeddings: self.embeddings.clone(),
        }
    }

    // ---- accessors ----

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn workflow(&self) -> &Workflow {
        &self.workflow
    }

    pub fn config(&self) -> &WorkflowConfig {
        &self.workflow.config
    }

    pub fn embeddings(&self) -> &EmbeddingStore {
        &self.embeddings
    }

    pub fn services(&self) -> &Services {
        &self.services
    }

    /// Position of the last applied event.
    pub fn sequence(&self) -> u64 {
        self.base_sequence + self.log.len() as u64
    }

    /// Events applied since construction or the restored snapshot.
    pub fn log(&self) -> &[EventRecord] {
        &self.log
    }

    /// Events after `sequence`.
    pub fn events_since(&self, sequence: u64) -> &[EventRecord] {
        let skip = sequence.saturating_sub(self.base_sequence).min(self.log.len() as u64) as usize;
        &self.log[skip..]
    }

    pub fn export_json(&self) -> String {
        self.graph.export_json()
    }

    // ---- reducer ----

    fn apply(&mut self, record: &EventRecord) -> Result<Applied> {
        Ok(match &record.event {
            Event::ConfigUpdated(c) => {
                c.validate()?;
                self.workflow.config = c.clone();
                Applied::Nothing
            }
            Event::NodeAdded(Node::Expression(n)) => {
                let issues = n.annotation.issues(n.status == NodeStatus::Provisional);
                if !issues.is_empty() {
                    return Err(Error::Validation(issues.join("; ")));
                }
                self.graph.insert_expression(n.clone())?;
                Applied::Node(n.id.clone())
            }
            Event::NodeAdded(Node::Concept(c)) => {
                self.graph.insert_concept(c.clone())?;
                Applied::Node(c.id.clone())
            }
            Event::EdgeAdded(e) => {
                if e.status != EdgeStatus::Proposed
                    || e.revision_of.is_some()
                    || e.parallel_group.is_some()
                    || e.explanation.is_some()
                {
                    return Err(Error::validation("edge_added carries only fresh Proposed edges"));
                }
                if let Some(existing) = self.graph.find_edge(&e.src, &e.dst, e.edge_type) {
                    return Err(Error::Conflict(format!("edge {} duplicates {}", e.id, existing.id)));
                }
                e.provenance.check_policy()?;
                self.graph.insert_edge((**e).clone())?;
                Applied::Edge(e.clone())
            }
            Event::EmbeddingRegistered(r) => {
                if self.graph.node(&r.node_id).is_none() {
                    return Err(Error::NotFound(format!("node {}", r.node_id)));
                }
                self.embeddings.register(r.clone())?;
                Applied::Nothing
            }
            Event::EdgeEnqueued { edge_id } => {
                Applied::Queued(self.workflow.enqueue(&mut self.graph, edge_id, record.at)?)
            }
            Event::DecisionSubmitted(d) => {
                Applied::Decision(Box::new(self.workflow.submit_decision(&mut self.graph, d.clone())?))
            }
            Event::AdjudicationResolved(r) => {
                Applied::Resolved(self.workflow.resolve_adjudication(&mut self.graph, r)?.0)
            }
            Event::ThresholdUpdated { tau } => {
                let b = self.workflow.config.tau_bounds;
                if !(b.min..=b.max).contains(tau) {
                    return Err(Error::Validation(format!("tau {tau} outside [{}, {}]", b.min, b.max)));
                }
                self.workflow.config.tau = *tau;
                Applied::Nothing
            }
            Event::BundleGenerated(b) => {
                let edge = self.graph.edge_mut(&b.edge_id)?;
                let previous = edge.explanation.as_ref().map_or(0, |x| x.version);
                if b.version <= previous {
                    return Err(Error::Conflict(format!(
                        "bundle version {} for edge {} is not newer than {previous}",
                        b.version, b.edge_id
                    )));
                }
                edge.explanation = Some((**b).clone());
                Applied::Nothing
            }
            Event::GraphImported(doc) => {
                if self.graph.node_count() > 0 || self.graph.edge_count() > 0 {
                    return Err(Error::State("graph import needs an empty graph".into()));
                }
                let graph = Graph::from_document((**doc).clone())?;
                self.workflow.restore_queue(&graph, record.at)?;
                self.graph = graph;
                Applied::Nothing
            }
        })
    }

    fn commit(&mut self, event: Event) -> Result<Applied> {
        let record = EventRecord { sequence: self.sequence() + 1, event, at: self.services.clock.now() };
        let applied = self.apply(&record)?;
        self.log.push(record);
        Ok(applied)
    }

    /// Runs `f` and rolls every state change back if it fails, so multi-event
    /// operations either commit fully or leave no trace in the log.
    pub fn transaction<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let saved = (self.graph.clone(), self.workflow.clone(), self.embeddings.clone(), self.log.len());
        f(self).inspect_err(|_| {
            self.graph = saved.0;
            self.workflow = saved.1;
            self.embeddings = saved.2;
            self.log.truncate(saved.3);
        })
    }

    // ---- configuration ----

    pub fn set_config(&mut self, config: WorkflowConfig) -> Result<()> {
        config.validate()?;
        if config != self.workflow.config {
            self.commit(Event::ConfigUpdated(config))?;
        }
        Ok(())
    }

    // ---- nodes and edges ----

    pub fn add_expression(&mut self, new: NewExpression) -> Result<NodeId> {
        match self.graph.prepare_expression(new)? {
            Prepared::Existing(n) => Ok(n.id),
            Prepared::New(n) => match self.commit(Event::NodeAdded(Node::Expression(n)))? {
                Applied::Node(id) => Ok(id),
                _ => unreachable!("node_added yields a node"),
            },
        }
    }

    /// Adds several expressions atomically. Each entry reports the node id
    /// and whether it was newly created.
    pub fn add_expressions(&mut self, items: Vec<NewExpression>) -> Result<Vec<(NodeId, bool)>> {
        self.transaction(|eng| {
            items
                .into_iter()
                .map(|new| {
                    let before = eng.graph.node_count();
                    let id = eng.add_expression(new)?;
                    Ok((id, eng.graph.node_count() > before))
                })
                .collect()
        })
    }

    pub fn add_concept(&mut self, new: NewConcept) -> Result<NodeId> {
        match self.graph.prepare_concept(new)? {
            Prepared::Existing(n) => Ok(n.id),
            Prepared::New(n) => match self.commit(Event::NodeAdded(Node::Concept(n)))? {
                Applied::Node(id) => Ok(id),
                _ => unreachable!("node_added yields a node"),
            },
        }
    }

    pub fn add_edge(&mut self, new: NewEdge) -> Result<Edge> {
        match self.graph.prepare_edge(new)? {
            Prepared::Existing(e) => Ok(e),
            Prepared::New(e) => match self.commit(Event::EdgeAdded(Box::new(e)))? {
                Applied::Edge(e) => Ok(*e),
                _ => unreachable!("edge_added yields an edge"),
            },
        }
    }

    /// Turns candidates into Proposed edges. Expression→concept candidates
    /// sharing a source list each other as alternatives. Candidates whose
    /// edge already exists return that edge unchanged.
    pub fn materialize(&mut self, candidates: &[CandidateEdge]) -> Result<Vec<Edge>> {
        self.transaction(|eng| {
            let mut out = Vec::with_capacity(candidates.len());
            for c in candidates {
                let provenance = eng
                    .graph
                    .expression(&c.src)
                    .map(|e| e.provenance.clone())
                    .ok_or_else(|| Error::NotFound(format!("expression {}", c.src)))?;
                let alternatives = if c.edge_type == EdgeType::ExpressionConcept {
                    candidates
                        .iter()
                        .filter(|o| o.src == c.src && o.edge_type == c.edge_type && o.dst != c.dst)
                        .map(|o| Alternative { dst: o.dst.clone(), score: o.score })
                        .collect()
                } else {
                    Vec::new()
                };
                out.push(eng.add_edge(NewEdge {
                    src: c.src.clone(),
                    dst: c.dst.clone(),
                    edge_type: c.edge_type,
                    model_confidence: c.score,
                    rationale: c.rationale.clone(),
                    provenance,
                    proposer_id: Some(c.proposer_id.clone()),
                    alternatives,
                })?);
            }
            Ok(out)
        })
    }

    // ---- embeddings ----

    pub fn register_embedding(&mut self, record: EmbeddingRecord) -> Result<()> {
        if self.graph.node(&record.node_id).is_none() {
            return Err(Error::NotFound(format!("node {}", record.node_id)));
        }
        self.embeddings.check(&record)?;
        self.commit(Event::EmbeddingRegistered(record)).map(|_| ())
    }

    /// Embeds every expression that has no vector under `provider_id` yet.
    /// Returns the number of vectors registered.
    pub fn embed_expressions(&mut self, provider_id: &str) -> Result<usize> {
        let provider = self.services.provider(provider_id)?.clone();
        let todo: Vec<(NodeId, String)> = self
            .graph
            .expressions()
            .filter(|e| self.embeddings.get(provider_id, &e.id).is_none())
            .map(|e| (e.id.clone(), e.surface_text.clone()))
            .collect();
        let vectors =
            self.services.exec.map(&todo, |(_, text)| provider.embed(text)).into_iter().collect::<Result<Vec<_>>>()?;
        self.transaction(|eng| {
            for ((node_id, _), vector) in todo.iter().zip(vectors) {
                eng.register_embedding(EmbeddingRecord {
                    node_id: node_id.clone(),
                    dim: vector.len(),
                    vector,
                    provider_id: provider_id.to_owned(),
                })?;
            }
            Ok(todo.len())
        })
    }

    /// Registered vector for `node`, else the provider's embedding of its text.
    pub fn vector_for(&self, provider_id: &str, node: &NodeId) -> Result<Vec<f64>> {
        if let Some(v) = self.embeddings.get(provider_id, node) {
            return Ok(v.to_vec());
        }
        let n = self.graph.node(node).ok_or_else(|| Error::NotFound(format!("node {node}")))?;
        self.services.provider(provider_id)?.embed(&n.text())
    }

    // ---- proposals ----

    /// Similarity parameters with engine defaults filled in; the threshold
    /// defaults to the workflow's current tau.
    pub fn similarity_params(&self, provider_id: Option<&str>, k: Option<usize>, tau: Option<f64>) -> SimilarityParams {
        SimilarityParams {
            provider_id: provider_id.unwrap_or(&self.services.default_provider).to_owned(),
            k: k.unwrap_or(self.services.k),
            tau: tau.unwrap_or(self.workflow.config.tau),
        }
    }

    pub fn propose_intra_lingual(&self, language: &str, params: &SimilarityParams) -> Result<Vec<CandidateEdge>> {
        propose_intra_lingual(&self.graph, &self.embeddings, language, params, self.services.exec)
    }

    pub fn propose_cross_lingual(
        &self,
        lang_a: &str,
        lang_b: &str,
        params: &SimilarityParams,
    ) -> Result<Vec<CandidateEdge>> {
        propose_cross_lingual(&self.graph, &self.embeddings, lang_a, lang_b, params, self.services.exec)
    }

    pub fn propose_expression_concept(&self, node: &NodeId) -> Result<Vec<CandidateEdge>> {
        let expr = match self.graph.node(node) {
            Some(NodeRef::Expression(e)) => e,
            Some(NodeRef::Concept(_)) => return Err(Error::Type(format!("{node} is a concept node"))),
            None => return Err(Error::NotFound(format!("node {node}"))),
        };
        let concepts: Vec<_> = self.graph.concepts().collect();
        let proposer = &self.services.proposer;
        proposer.propose(expr, &concepts).map_err(|e| Error::Proposer {
            proposer: proposer.id().to_owned(),
            node: node.to_string(),
            message: e.to_string(),
        })
    }

    /// Concept proposals for every active expression. A failing node is
    /// reported and does not affect the others.
    pub fn propose_all_concepts(&self) -> (Vec<CandidateEdge>, Vec<Error>) {
        let ids: Vec<NodeId> =
            self.graph.expressions().filter(|e| e.status == NodeStatus::Active).map(|e| e.id.clone()).collect();
        let mut candidates = Vec::new();
        let mut errors = Vec::new();
        for r in self.services.exec.map(&ids, |id| self.propose_expression_concept(id)) {
            match r {
                Ok(c) => candidates.extend(c),
                Err(e) => errors.push(e),
            }
        }
        (candidates, errors)
    }

    /// Places a new surface text in the graph: the existing node on an exact
    /// match, a new node linked to its nearest neighbor when that neighbor
    /// scores at least `tau_align`, otherwise a provisional node.
    pub fn align_new_expression(&mut self, req: AlignRequest) -> Result<AlignmentResult> {
        let text = normalize(&req.surface_text);
        let language = normalize_language(&req.language);
        if let Some(id) = self.graph.find_expression(&text, &language) {
            return Ok(AlignmentResult {
                outcome: AlignOutcome::Exact,
                node_id: id.clone(),
                matched: Some(id.clone()),
                similarity: Some(1.0),
                candidate: None,
            });
        }
        let provider_id = req.provider_id.clone().unwrap_or_else(|| self.services.default_provider.clone());
        let provider = self.services.provider(&provider_id)?.clone();
        let vector = provider.embed(&text)?;
        let ids: Vec<NodeId> = self.graph.expressions().map(|e| e.id.clone()).collect();
        let scores = self
            .services
            .exec
            .map(&ids, |id| -> Result<f64> {
                let v = self.vector_for(&provider_id, id)?;
                Ok(normalized_score(cosine(&vector, &v)?))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let best = ids
            .iter()
            .zip(&scores)
            .max_by(|a, b| a.1.total_cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(id, s)| (id.clone(), *s));
        let now = self.services.clock.now();
        let tau_align = self.services.tau_align;

        self.transaction(|eng| match best {
            Some((matched, score)) if score >= tau_align => {
                let m = eng.graph.expression(&matched).expect("listed above").clone();
                let node_id = eng.add_expression(NewExpression {
                    surface_text: text.clone(),
                    language: language.clone(),
                    gloss: req.gloss.clone(),
                    annotation: req.annotation.clone().unwrap_or(m.annotation.clone()),
                    provenance: req.provenance.clone().unwrap_or(m.provenance.clone()),
                    status: NodeStatus::Active,
                })?;
                eng.register_embedding(EmbeddingRecord {
                    node_id: node_id.clone(),
                    dim: vector.len(),
                    vector: vector.clone(),
                    provider_id: provider_id.clone(),
                })?;
                let edge_type = if m.language == language { EdgeType::IntraLingual } else { EdgeType::CrossLingual };
                let provenance = eng.graph.expression(&node_id).expect("just added").provenance.clone();
                let edge = eng.add_edge(NewEdge {
                    src: node_id.clone(),
                    dst: matched.clone(),
                    edge_type,
                    model_confidence: score,
                    rationale: format!(
                        "normalized similarity {score:.3} to \"{}\" under {provider_id}",
                        m.surface_text
                    ),
                    provenance,
                    proposer_id: Some(format!("align:{provider_id}")),
                    alternatives: Vec::new(),
                })?;
                Ok(AlignmentResult {
                    outcome: AlignOutcome::Similar,
                    node_id,
                    matched: Some(matched),
                    similarity: Some(score),
                    candidate: Some(edge),
                })
            }
            _ => {
                let node_id = eng.add_expression(NewExpression {
                    surface_text: text.clone(),
                    language: language.clone(),
                    gloss: req.gloss.clone(),
                    annotation: req.annotation.clone().unwrap_or_else(|| AnnotationRecord::placeholder("pending")),
                    provenance: req.provenance.clone().unwrap_or_else(|| Provenance::synthetic("align-request", now)),
                    status: NodeStatus::Provisional,
                })?;
                eng.register_embedding(EmbeddingRecord {
                    node_id: node_id.clone(),
                    dim: vector.len(),
                    vector: vector.clone(),
                    provider_id: provider_id.clone(),
                })?;
                Ok(AlignmentResult {
                    outcome: AlignOutcome::Provisional,
                    node_id,
                    matched: None,
                    similarity: best.map(|(_, s)| s),
                    candidate: None,
                })
            }
        })
    }

    // ---- review workflow ----

    pub fn enqueue(&mut self, edge_id: &EdgeId) -> Result<QueueItem> {
        self.workflow.check_enqueue(&self.graph, edge_id)?;
        match self.commit(Event::EdgeEnqueued { edge_id: edge_id.clone() })? {
            Applied::Queued(item) => Ok(item),
            _ => unreachable!("edge_enqueued yields a queue item"),
        }
    }

    /// Enqueues every Proposed edge in id order.
    pub fn enqueue_proposed(&mut self) -> Result<Vec<QueueItem>> {
        let ids: Vec<EdgeId> =
            self.graph.edges().filter(|e| e.status == EdgeStatus::Proposed).map(|e| e.id.clone()).collect();
        self.transaction(|eng| ids.iter().map(|id| eng.enqueue(id)).collect())
    }

    pub fn next_batch(&self, role: Role, batch_size: usize) -> Result<Vec<QueueItem>> {
        self.workflow.next_batch(&self.graph, role, batch_size)
    }

    /// Records a decision. Edges that settle as Accepted get an explanation
    /// bundle in the same step.
    pub fn submit_decision(&mut self, decision: ValidationDecision) -> Result<DecisionOutcome> {
        self.workflow.check_decision(&self.graph, &decision)?;
        self.transaction(|eng| {
            let outcome = match eng.commit(Event::DecisionSubmitted(decision))? {
                Applied::Decision(o) => *o,
                _ => unreachable!("decision_submitted yields an outcome"),
            };
            eng.bundle_settled(&outcome.transitions)?;
            let edge = eng.graph.edge(&outcome.edge.id).expect("decided edge exists").clone();
            Ok(DecisionOutcome { edge, ..outcome })
        })
    }

    pub fn resolve_adjudication(&mut self, resolution: Resolution) -> Result<Vec<Edge>> {
        self.workflow.check_resolution(&self.graph, &resolution)?;
        self.transaction(|eng| {
            let before = eng.graph.transitions().len();
            let edges = match eng.commit(Event::AdjudicationResolved(resolution))? {
                Applied::Resolved(edges) => edges,
                _ => unreachable!("adjudication_resolved yields edges"),
            };
            let transitions = eng.graph.transitions()[before..].to_vec();
            eng.bundle_settled(&transitions)?;
            Ok(edges.iter().map(|e| eng.graph.edge(&e.id).expect("resolved edge exists").clone()).collect())
        })
    }

    fn bundle_settled(&mut self, transitions: &[Transition]) -> Result<()> {
        for t in transitions {
            if matches!(t.to, EdgeStatus::Accepted | EdgeStatus::ParallelRetained) {
                self.generate_bundle(&t.edge_id)?;
            }
        }
        Ok(())
    }

    /// Moves tau by the reject rate of the last `window` settled edges
    /// (Accepted or Rejected transitions, most recent last). An empty window
    /// leaves tau unchanged and records nothing.
    pub fn update_thresholds(&mut self, window: usize) -> Result<ThresholdUpdate> {
        let outcomes: Vec<EdgeStatus> = self
            .graph
            .transitions()
            .iter()
            .rev()
            .filter(|t| matches!(t.to, EdgeStatus::Accepted | EdgeStatus::Rejected))
            .take(window)
            .map(|t| t.to)
            .collect();
        let previous = self.workflow.config.tau;
        let tau = update_thresholds(&outcomes, &self.workflow.config);
        if tau != previous {
            self.commit(Event::ThresholdUpdated { tau })?;
        }
        Ok(ThresholdUpdate {
            previous,
            tau,
            accepted: outcomes.iter().filter(|s| **s == EdgeStatus::Accepted).count(),
            rejected: outcomes.iter().filter(|s| **s == EdgeStatus::Rejected).count(),
        })
    }

    // ---- explanations ----

    fn explain_context(&self) -> Result<ExplainContext<'_>> {
        Ok(ExplainContext {
            graph: &self.graph,
            embeddings: &self.embeddings,
            provider: self.services.provider(&self.services.default_provider)?.as_ref(),
            rules: &self.services.rules,
            nearest_k: self.services.nearest_k,
            exec: self.services.exec,
        })
    }

    /// Builds the next bundle version for `edge_id` without recording it.
    pub fn preview_bundle(&self, edge_id: &EdgeId) -> Result<ExplanationBundle> {
        let edge = self.graph.edge(edge_id).ok_or_else(|| Error::NotFound(format!("edge {edge_id}")))?;
        let version = edge.explanation.as_ref().map_or(0, |b| b.version) + 1;
        generate_bundle(&self.explain_context()?, edge, version)
    }

    /// Builds and stores a new bundle version.
    pub fn generate_bundle(&mut self, edge_id: &EdgeId) -> Result<ExplanationBundle> {
        let bundle = self.preview_bundle(edge_id)?;
        self.commit(Event::BundleGenerated(Box::new(bundle.clone())))?;
        Ok(bundle)
    }

    /// The stored bundle, or a preview when none has been stored.
    pub fn explanation(&self, edge_id: &EdgeId) -> Result<ExplanationBundle> {
        let edge = self.graph.edge(edge_id).ok_or_else(|| Error::NotFound(format!("edge {edge_id}")))?;
        match &edge.explanation {
            Some(b) => Ok(b.clone()),
            None => self.preview_bundle(edge_id),
        }
    }

    pub fn report(&self, edge_id: &EdgeId) -> Result<Report> {
        let bundle = self.explanation(edge_id)?;
        let edge = self.graph.edge(edge_id).expect("checked by explanation");
        Ok(render_report(&self.graph, edge, &bundle, &self.workflow.decisions(edge_id)))
    }

    // ---- metrics and interchange ----

    pub fn connectivity(&self) -> GraphMetrics {
        connectivity_metrics(&self.graph)
    }

    /// `None` when the metric is undefined for the current graph.
    pub fn semantic_coherence(&self, provider_id: &str) -> Result<Option<f64>> {
        semantic_coherence(&self.graph, |id| self.vector_for(provider_id, id), self.services.exec)
    }

    /// Loads a graph document into an empty engine.
    pub fn import_json(&mut self, text: &str) -> Result<()> {
        let graph = Graph::import_json(text)?;
        if self.graph.node_count() > 0 || self.graph.edge_count() > 0 {
            return Err(Error::State("graph import needs an empty graph".into()));
        }
        self.commit(Event::GraphImported(Box::new(graph.to_document()))).map(|_| ())
    }
}
