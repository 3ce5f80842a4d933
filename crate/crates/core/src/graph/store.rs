use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::model::*;
use crate::annotation::AnnotationRecord;
use crate::error::{check_unit, Error, Result};
use crate::ids::{EdgeId, GroupId, NodeId};
use crate::text::{normalize, normalize_language};

/// Input for [`Graph::add_expression`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewExpression {
    pub surface_text: String,
    pub language: String,
    #[serde(default)]
    pub gloss: Option<String>,
    pub annotation: AnnotationRecord,
    pub provenance: Provenance,
    #[serde(default)]
    pub status: NodeStatus,
}

/// Input for [`Graph::add_concept`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewConcept {
    pub code: String,
    pub framework: Framework,
    pub label: String,
    #[serde(default)]
    pub description: Option<String>,
}

/// Input for [`Graph::add_edge`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub edge_type: EdgeType,
    pub model_confidence: f64,
    pub rationale: String,
    pub provenance: Provenance,
    #[serde(default)]
    pub proposer_id: Option<String>,
    #[serde(default)]
    pub alternatives: Vec<Alternative>,
}

/// Result of checking an insertion against the store before committing it.
#[derive(Clone, Debug, PartialEq)]
pub enum Prepared<T> {
    Existing(T),
    New(T),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct EdgeKey(NodeId, NodeId, EdgeType);

impl EdgeKey {
    fn new(src: &NodeId, dst: &NodeId, edge_type: EdgeType) -> Self {
        if edge_type.is_symmetric() && dst < src {
            EdgeKey(dst.clone(), src.clone(), edge_type)
        } else {
            EdgeKey(src.clone(), dst.clone(), edge_type)
        }
    }
}

/// Heterogeneous expression/concept graph.
///
/// All collections are keyed by id so iteration order, and therefore every
/// export and query result, is deterministic.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    expressions: BTreeMap<NodeId, ExpressionNode>,
    concepts: BTreeMap<NodeId, ConceptNode>,
    edges: BTreeMap<EdgeId, Edge>,
    expression_index: HashMap<(String, String), NodeId>,
    concept_index: HashMap<(String, Framework), NodeId>,
    edge_index: HashMap<EdgeKey, EdgeId>,
    incident: HashMap<NodeId, BTreeSet<EdgeId>>,
    transitions: Vec<Transition>,
    next_node: u64,
    next_edge: u64,
    next_group: u64,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn expressions(&self) -> impl Iterator<Item = &ExpressionNode> {
        self.expressions.values()
    }

    pub fn concepts(&self) -> impl Iterator<Item = &ConceptNode> {
        self.concepts.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn expression(&self, id: &NodeId) -> Option<&ExpressionNode> {
        self.expressions.get(id)
    }

    pub fn concept(&self, id: &NodeId) -> Option<&ConceptNode> {
        self.concepts.get(id)
    }

    pub fn node(&self, id: &NodeId) -> Option<NodeRef<'_>> {
        self.expressions.get(id).map(NodeRef::Expression).or_else(|| self.concepts.get(id).map(NodeRef::Concept))
    }

    pub fn edge(&self, id: &EdgeId) -> Option<&Edge> {
        self.edges.get(id)
    }

    pub fn node_count(&self) -> usize {
        self.expressions.len() + self.concepts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Every status change applied since this graph was created or imported.
    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn find_expression(&self, surface_text: &str, language: &str) -> Option<&NodeId> {
        self.expression_index.get(&(normalize(surface_text), normalize_language(language)))
    }

    pub fn find_concept(&self, code: &str, framework: Framework) -> Option<&NodeId> {
        self.concept_index.get(&(code.trim().to_owned(), framework))
    }

    pub fn find_edge(&self, src: &NodeId, dst: &NodeId, edge_type: EdgeType) -> Option<&Edge> {
        self.edge_index.get(&EdgeKey::new(src, dst, edge_type)).and_then(|id| self.edges.get(id))
    }

    pub(crate) fn edge_mut(&mut self, id: &EdgeId) -> Result<&mut Edge> {
        self.edges.get_mut(id).ok_or_else(|| Error::NotFound(format!("edge {id}")))
    }

    // ---- expressions ----

    pub fn prepare_expression(&self, new: NewExpression) -> Result<Prepared<ExpressionNode>> {
        let surface_text = normalize(&new.surface_text);
        let language = normalize_language(&new.language);
        if surface_text.is_empty() {
            return Err(Error::validation("surface_text is empty"));
        }
        if language.is_empty() {
            return Err(Error::validation("language tag is empty"));
        }
        let issues = new.annotation.issues(new.status == NodeStatus::Provisional);
        if !issues.is_empty() {
            return Err(Error::Validation(issues.join("; ")));
        }
        new.provenance.check_policy()?;
        if let Some(id) = self.expression_index.get(&(surface_text.clone(), language.clone())) {
            return Ok(Prepared::Existing(self.expressions[id].clone()));
        }
        Ok(Prepared::New(ExpressionNode {
            id: NodeId::from_seq(self.next_node),
            surface_text,
            language,
            gloss: new.gloss.filter(|g| !g.trim().is_empty()),
            annotation: new.annotation,
            provenance: new.provenance,
            status: new.status,
        }))
    }

    pub(crate) fn insert_expression(&mut self, node: ExpressionNode) -> Result<()> {
        if self.node(&node.id).is_some() {
            return Err(Error::Conflict(format!("node id {} already in use", node.id)));
        }
        let key = (normalize(&node.surface_text), normalize_language(&node.language));
        if key.0.is_empty() || key.1.is_empty() {
            return Err(Error::validation(format!("expression {} has empty text or language", node.id)));
        }
        if key.1 != node.language {
            return Err(Error::validation(format!("expression {} language tag is not lowercase", node.id)));
        }
        if let Some(existing) = self.expression_index.get(&key) {
            return Err(Error::Conflict(format!(
                "expression {} duplicates {existing} ({:?}, {})",
                node.id, key.0, key.1
            )));
        }
        node.provenance.check_policy()?;
        check_unit("annotator_confidence", node.annotation.annotator_confidence)?;
        self.bump_node(&node.id);
        self.expression_index.insert(key, node.id.clone());
        self.expressions.insert(node.id.clone(), node);
        Ok(())
    }

    /// Idempotent on normalized `(surface_text, language)`.
    pub fn add_expression(&mut self, new: NewExpression) -> Result<NodeId> {
        match self.prepare_expression(new)? {
            Prepared::Existing(node) => Ok(node.id),
            Prepared::New(node) => {
                let id = node.id.clone();
                self.insert_expression(node)?;
                Ok(id)
            }
        }
    }

    // ---- concepts ----

    pub fn prepare_concept(&self, new: NewConcept) -> Result<Prepared<ConceptNode>> {
        let code = new.code.trim().to_owned();
        let label = new.label.trim().to_owned();
        if code.is_empty() {
            return Err(Error::validation("concept code is empty"));
        }
        if label.is_empty() {
            return Err(Error::validation("concept label is empty"));
        }
        if let Some(id) = self.concept_index.get(&(code.clone(), new.framework)) {
            let existing = &self.concepts[id];
            if existing.label != label {
                return Err(Error::Conflict(format!(
                    "concept {code} ({:?}) already exists as {id} with label {:?}",
                    new.framework, existing.label
                )));
            }
            return Ok(Prepared::Existing(existing.clone()));
        }
        Ok(Prepared::New(ConceptNode {
            id: NodeId::from_seq(self.next_node),
            code,
            framework: new.framework,
            label,
            description: new.description.filter(|d| !d.trim().is_empty()),
        }))
    }

    pub(crate) fn insert_concept(&mut self, node: ConceptNode) -> Result<()> {
        if self.node(&node.id).is_some() {
            return Err(Error::Conflict(format!("node id {} already in use", node.id)));
        }
        if node.code.is_empty() || node.label.trim().is_empty() {
            return Err(Error::validation(format!("concept {} has empty code or label", node.id)));
        }
        let key = (node.code.clone(), node.framework);
        if let Some(existing) = self.concept_index.get(&key) {
            return Err(Error::Conflict(format!("concept {} duplicates {existing} ({}, {:?})", node.id, key.0, key.1)));
        }
        self.bump_node(&node.id);
        self.concept_index.insert(key, node.id.clone());
        self.concepts.insert(node.id.clone(), node);
        Ok(())
    }

    /// Idempotent on `(code, framework)`; a differing label is a conflict.
    pub fn add_concept(&mut self, new: NewConcept) -> Result<NodeId> {
        match self.prepare_concept(new)? {
            Prepared::Existing(node) => Ok(node.id),
            Prepared::New(node) => {
                let id = node.id.clone();
                self.insert_concept(node)?;
                Ok(id)
            }
        }
    }

    fn bump_node(&mut self, id: &NodeId) {
        if let Some(seq) = id.seq() {
            self.next_node = self.next_node.max(seq + 1);
        }
    }

    // ---- edges ----

    /// Checks the endpoint-kind and language invariants of `edge_type`.
    pub fn check_endpoints(&self, src: &NodeId, dst: &NodeId, edge_type: EdgeType) -> Result<()> {
        let src_node = self.node(src).ok_or_else(|| Error::NotFound(format!("node {src}")))?;
        let dst_node = self.node(dst).ok_or_else(|| Error::NotFound(format!("node {dst}")))?;
        if src == dst {
            return Err(Error::Type(format!("self-loop on {src}")));
        }
        match (edge_type, src_node, dst_node) {
            (EdgeType::IntraLingual, NodeRef::Expression(a), NodeRef::Expression(b)) => {
                if a.language != b.language {
                    return Err(Error::Type(format!(
                        "IntraLingual edge needs equal languages, got {} and {}",
                        a.language, b.language
                    )));
                }
            }
            (EdgeType::CrossLingual, NodeRef::Expression(a), NodeRef::Expression(b)) => {
                if a.language == b.language {
                    return Err(Error::Type(format!(
                        "CrossLingual edge needs different languages, both are {}",
                        a.language
                    )));
                }
            }
            (EdgeType::ExpressionConcept, NodeRef::Expression(_), NodeRef::Concept(_)) => {}
            (t, _, _) => {
                return Err(Error::Type(format!("{t:?} edge cannot connect {src} to {dst} (endpoint kind mismatch)")))
            }
        }
        Ok(())
    }

    pub fn prepare_edge(&self, new: NewEdge) -> Result<Prepared<Edge>> {
        check_unit("model_confidence", new.model_confidence)?;
        self.check_endpoints(&new.src, &new.dst, new.edge_type)?;
        new.provenance.check_policy()?;
        if let Some(existing) = self.find_edge(&new.src, &new.dst, new.edge_type) {
            return Ok(Prepared::Existing(existing.clone()));
        }
        Ok(Prepared::New(self.build_edge(new, None)))
    }

    fn build_edge(&self, new: NewEdge, revision_of: Option<EdgeId>) -> Edge {
        Edge {
            id: EdgeId::from_seq(self.next_edge),
            src: new.src,
            dst: new.dst,
            edge_type: new.edge_type,
            status: EdgeStatus::Proposed,
            model_confidence: new.model_confidence,
            validator_agreement: None,
            combined_confidence: None,
            rationale: new.rationale,
            provenance: new.provenance,
            proposer_id: new.proposer_id,
            parallel_group: None,
            parallel_reason: None,
            revision_of,
            adjudication: None,
            adjudication_rounds: 0,
            alternatives: new.alternatives,
            explanation: None,
        }
    }

    pub(crate) fn insert_edge(&mut self, edge: Edge) -> Result<()> {
        if self.edges.contains_key(&edge.id) {
            return Err(Error::Conflict(format!("edge id {} already in use", edge.id)));
        }
        self.check_endpoints(&edge.src, &edge.dst, edge.edge_type)?;
        check_unit("model_confidence", edge.model_confidence)?;
        for (name, v) in
            [("validator_agreement", edge.validator_agreement), ("combined_confidence", edge.combined_confidence)]
        {
            if let Some(v) = v {
                check_unit(name, v)?;
            }
        }
        if let Some(seq) = edge.id.seq() {
            self.next_edge = self.next_edge.max(seq + 1);
        }
        if let Some(seq) = edge.parallel_group.as_ref().and_then(GroupId::seq) {
            self.next_group = self.next_group.max(seq + 1);
        }
        let key = EdgeKey::new(&edge.src, &edge.dst, edge.edge_type);
        if edge.status != EdgeStatus::Superseded {
            self.edge_index.entry(key).or_insert_with(|| edge.id.clone());
        }
        for end in [&edge.src, &edge.dst] {
            self.incident.entry(end.clone()).or_default().insert(edge.id.clone());
        }
        self.edges.insert(edge.id.clone(), edge);
        Ok(())
    }

    /// New edges start as `Proposed`. Re-adding the same `(src, dst, type)`
    /// returns the existing edge; lingual edges match in either direction.
    pub fn add_edge(&mut self, new: NewEdge) -> Result<Edge> {
        match self.prepare_edge(new)? {
            Prepared::Existing(edge) => Ok(edge),
            Prepared::New(edge) => {
                self.insert_edge(edge.clone())?;
                Ok(edge)
            }
        }
    }

    /// Creates a revised copy of `original` that bypasses deduplication.
    pub(crate) fn add_revision(
        &mut self,
        original: &EdgeId,
        dst: NodeId,
        edge_type: EdgeType,
        rationale: String,
    ) -> Result<Edge> {
        let orig = self.edges.get(original).ok_or_else(|| Error::NotFound(format!("edge {original}")))?;
        self.check_endpoints(&orig.src, &dst, edge_type)?;
        let new = NewEdge {
            src: orig.src.clone(),
            dst,
            edge_type,
            model_confidence: orig.model_confidence,
            rationale,
            provenance: orig.provenance.clone(),
            proposer_id: orig.proposer_id.clone(),
            alternatives: Vec::new(),
        };
        let edge = self.build_edge(new, Some(original.clone()));
        self.insert_edge(edge.clone())?;
        Ok(edge)
    }

    /// Moves an edge along the lifecycle table, recording the transition.
    pub(crate) fn set_status(&mut self, id: &EdgeId, to: EdgeStatus) -> Result<Transition> {
        let edge = self.edge_mut(id)?;
        let from = edge.status;
        if !from.can_transition_to(to) {
            return Err(Error::State(format!("edge {id} cannot move from {from:?} to {to:?}")));
        }
        edge.status = to;
        let key = EdgeKey::new(&edge.src, &edge.dst, edge.edge_type);
        if to == EdgeStatus::Superseded && self.edge_index.get(&key) == Some(id) {
            self.edge_index.remove(&key);
        }
        let t = Transition { edge_id: id.clone(), from, to };
        self.transitions.push(t.clone());
        Ok(t)
    }

    /// Incident edges of `node` (both directions) with the node at the other end,
    /// ordered by edge id.
    pub fn neighbors(
        &self,
        node: &NodeId,
        edge_type: Option<EdgeType>,
        statuses: Option<&BTreeSet<EdgeStatus>>,
    ) -> Result<Vec<(Edge, Node)>> {
        if self.node(node).is_none() {
            return Err(Error::NotFound(format!("node {node}")));
        }
        let Some(ids) = self.incident.get(node) else {
            return Ok(Vec::new());
        };
        Ok(ids
            .iter()
            .map(|id| &self.edges[id])
            .filter(|e| edge_type.is_none_or(|t| e.edge_type == t))
            .filter(|e| statuses.is_none_or(|s| s.contains(&e.status)))
            .map(|e| {
                let other = self.node(e.other_end(node)).expect("referential integrity");
                (e.clone(), Node::from(other))
            })
            .collect())
    }

    /// Marks competing adjudicated interpretations as retained in parallel.
    pub fn retain_parallel(&mut self, edge_ids: &[EdgeId], reasons: &[String]) -> Result<GroupId> {
        self.check_parallel(edge_ids, reasons)?;
        let group = GroupId::from_seq(self.next_group);
        self.next_group += 1;
        for (id, reason) in edge_ids.iter().zip(reasons) {
            self.set_status(id, EdgeStatus::ParallelRetained)?;
            let edge = self.edge_mut(id)?;
            edge.parallel_group = Some(group.clone());
            edge.parallel_reason = Some(reason.trim().to_owned());
        }
        Ok(group)
    }

    pub(crate) fn check_parallel(&self, edge_ids: &[EdgeId], reasons: &[String]) -> Result<()> {
        if edge_ids.len() < 2 {
            return Err(Error::validation("parallel retention needs at least two edges"));
        }
        if reasons.len() != edge_ids.len() {
            return Err(Error::Validation(format!(
                "parallel retention needs one reason per edge ({} edges, {} reasons)",
                edge_ids.len(),
                reasons.len()
            )));
        }
        if reasons.iter().any(|r| r.trim().is_empty()) {
            return Err(Error::validation("parallel retention reasons must be non-empty"));
        }
        let unique: BTreeSet<_> = edge_ids.iter().collect();
        if unique.len() != edge_ids.len() {
            return Err(Error::validation("parallel retention edge ids must be distinct"));
        }
        let mut src: Option<&NodeId> = None;
        for id in edge_ids {
            let edge = self.edges.get(id).ok_or_else(|| Error::NotFound(format!("edge {id}")))?;
            if edge.status != EdgeStatus::Adjudication {
                return Err(Error::State(format!(
                    "edge {id} is {:?}, parallel retention needs Adjudication",
                    edge.status
                )));
            }
            match src {
                None => src = Some(&edge.src),
                Some(s) if s != &edge.src => {
                    return Err(Error::Validation(format!(
                        "parallel edges must share a source node ({s} vs {})",
                        edge.src
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Full scan of the structural invariants. Empty means consistent.
    pub fn integrity_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut groups: BTreeMap<&GroupId, &NodeId> = BTreeMap::new();
        for e in self.edges.values() {
            if let Err(err) = self.check_endpoints(&e.src, &e.dst, e.edge_type) {
                out.push(format!("edge {}: {err}", e.id));
            }
            for (name, v) in [
                ("model_confidence", Some(e.model_confidence)),
                ("validator_agreement", e.validator_agreement),
                ("combined_confidence", e.combined_confidence),
            ] {
                if let Some(v) = v {
                    if check_unit(name, v).is_err() {
                        out.push(format!("edge {}: {name} out of range ({v})", e.id));
                    }
                }
            }
            if let Some(g) = &e.parallel_group {
                if let Some(src) = groups.insert(g, &e.src) {
                    if src != &e.src {
                        out.push(format!("parallel group {g} mixes sources"));
                    }
                }
            }
            if let Some(r) = &e.revision_of {
                if !self.edges.contains_key(r) {
                    out.push(format!("edge {} revises missing edge {r}", e.id));
                }
            }
        }
        out
    }

    pub(crate) fn restore_transitions(&mut self, transitions: Vec<Transition>) {
        self.transitions = transitions;
    }
}
