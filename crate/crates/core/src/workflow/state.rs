use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::scoring::{combined_confidence, uncertainty, validator_agreement};
use super::types::*;
use crate::error::{Error, Result};
use crate::graph::{AdjudicationNote, AdjudicationOutcome, Edge, EdgeStatus, EdgeType, Graph, Transition};
use crate::ids::EdgeId;

/// Request to close an adjudication round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub edge_id: EdgeId,
    pub outcome: AdjudicationOutcome,
    /// For `retain_parallel`: the competing edges (the adjudicated edge is
    /// added if missing).
    #[serde(default)]
    pub parallel_edges: Vec<EdgeId>,
    /// One reason per retained edge, aligned with the adjudicated edge first
    /// followed by `parallel_edges`.
    #[serde(default)]
    pub reasons: Vec<String>,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecisionOutcome {
    pub edge: Edge,
    pub revised: Option<Edge>,
    pub transitions: Vec<Transition>,
}

/// Validation queue, recorded decisions, and workflow configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Workflow {
    pub config: WorkflowConfig,
    queue: BTreeMap<EdgeId, QueueItem>,
    decisions: BTreeMap<EdgeId, BTreeMap<String, ValidationDecision>>,
}

pub fn batch_key(graph: &Graph, edge: &Edge) -> String {
    match edge.edge_type {
        EdgeType::ExpressionConcept => format!("concept:{}:{:?}", edge.dst, edge.edge_type),
        t => {
            let lang = |id| graph.expression(id).map(|e| e.language.clone()).unwrap_or_default();
            let mut langs = [lang(&edge.src), lang(&edge.dst)];
            langs.sort();
            format!("lang:{}|{}:{t:?}", langs[0], langs[1])
        }
    }
}

impl Workflow {
    pub fn new(config: WorkflowConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, ..Default::default() })
    }

    pub fn queue(&self) -> impl Iterator<Item = &QueueItem> {
        self.queue.values()
    }

    /// Latest decision per validator, ordered by (role, validator).
    pub fn decisions(&self, edge: &EdgeId) -> Vec<ValidationDecision> {
        let mut out: Vec<_> = self.decisions.get(edge).map(|m| m.values().cloned().collect()).unwrap_or_default();
        out.sort_by(|a, b| a.role.cmp(&b.role).then_with(|| a.validator_id.cmp(&b.validator_id)));
        out
    }

    pub fn check_enqueue(&self, graph: &Graph, edge_id: &EdgeId) -> Result<()> {
        let edge = graph.edge(edge_id).ok_or_else(|| Error::NotFound(format!("edge {edge_id}")))?;
        if edge.status != EdgeStatus::Proposed {
            return Err(Error::State(format!(
                "edge {edge_id} is {:?}, only Proposed edges can be enqueued",
                edge.status
            )));
        }
        Ok(())
    }

    pub fn enqueue(&mut self, graph: &mut Graph, edge_id: &EdgeId, at: DateTime<Utc>) -> Result<QueueItem> {
        self.check_enqueue(graph, edge_id)?;
        let edge = graph.edge(edge_id).expect("checked");
        let item = QueueItem {
            edge_id: edge_id.clone(),
            priority: uncertainty(edge.model_confidence)?,
            batch_key: batch_key(graph, edge),
            enqueued_at: at,
        };
        graph.set_status(edge_id, EdgeStatus::UnderValidation)?;
        self.queue.insert(edge_id.clone(), item.clone());
        Ok(item)
    }

    /// Rebuilds queue items for every UnderValidation edge without one, e.g.
    /// after a graph import. Existing items and decisions are kept.
    pub(crate) fn restore_queue(&mut self, graph: &Graph, at: DateTime<Utc>) -> Result<()> {
        for edge in graph.edges().filter(|e| e.status == EdgeStatus::UnderValidation) {
            if self.queue.contains_key(&edge.id) {
                continue;
            }
            let item = QueueItem {
                edge_id: edge.id.clone(),
                priority: uncertainty(edge.model_confidence)?,
                batch_key: batch_key(graph, edge),
                enqueued_at: at,
            };
            self.queue.insert(edge.id.clone(), item);
        }
        Ok(())
    }

    /// Up to `batch_size` items sharing the batch key of the highest-priority
    /// item still awaiting `role`. Priority desc, then edge id.
    pub fn next_batch(&self, graph: &Graph, role: Role, batch_size: usize) -> Result<Vec<QueueItem>> {
        if batch_size == 0 {
            return Err(Error::validation("batch_size must be at least 1"));
        }
        let mut pending: Vec<&QueueItem> = self
            .queue
            .values()
            .filter(|q| graph.edge(&q.edge_id).is_some_and(|e| e.status == EdgeStatus::UnderValidation))
            .filter(|q| self.decisions.get(&q.edge_id).is_none_or(|m| m.values().all(|d| d.role != role)))
            .collect();
        pending.sort_by(|a, b| b.priority.total_cmp(&a.priority).then_with(|| a.edge_id.cmp(&b.edge_id)));
        let Some(top) = pending.first() else {
            return Ok(Vec::new());
        };
        let key = top.batch_key.clone();
        Ok(pending.into_iter().filter(|q| q.batch_key == key).take(batch_size).cloned().collect())
    }

    /// Every check `submit_decision` performs before touching state.
    pub fn check_decision(&self, graph: &Graph, d: &ValidationDecision) -> Result<()> {
        let edge = graph.edge(&d.edge_id).ok_or_else(|| Error::NotFound(format!("edge {}", d.edge_id)))?;
        if !matches!(edge.status, EdgeStatus::UnderValidation | EdgeStatus::Adjudication) {
            return Err(Error::State(format!(
                "edge {} is {:?}, decisions need UnderValidation or Adjudication",
                d.edge_id, edge.status
            )));
        }
        if d.validator_id.trim().is_empty() {
            return Err(Error::validation("validator_id is empty"));
        }
        if !self.config.required_roles.contains(&d.role) {
            return Err(Error::Validation(format!("role {:?} is not a configured review role", d.role)));
        }
        match (&d.verdict, &d.modification) {
            (Verdict::Modify, None) => return Err(Error::validation("modify verdict needs a modification")),
            (Verdict::Modify, Some(m)) if m.is_empty() => {
                return Err(Error::validation("modify verdict needs a new dst or edge type"))
            }
            (Verdict::Modify, Some(m)) => {
                let dst = m.new_dst.clone().unwrap_or_else(|| edge.dst.clone());
                let edge_type = m.new_edge_type.unwrap_or(edge.edge_type);
                if dst == edge.dst && edge_type == edge.edge_type {
                    return Err(Error::validation("modification does not change the edge"));
                }
                graph.check_endpoints(&edge.src, &dst, edge_type)?;
            }
            _ => {}
        }
        Ok(())
    }

    pub fn submit_decision(&mut self, graph: &mut Graph, d: ValidationDecision) -> Result<DecisionOutcome> {
        self.check_decision(graph, &d)?;
        let edge_id = d.edge_id.clone();
        self.decisions.entry(edge_id.clone()).or_default().insert(d.validator_id.clone(), d);
        let decisions = self.decisions(&edge_id);
        let alpha = self.config.alpha;
        {
            let edge = graph.edge_mut(&edge_id)?;
            edge.validator_agreement = validator_agreement(&decisions);
            edge.combined_confidence = Some(combined_confidence(edge.model_confidence, &decisions, alpha));
        }

        let covered = self.config.required_roles.iter().all(|r| decisions.iter().any(|d| d.role == *r));
        let mut transitions = Vec::new();
        let mut revised = None;
        if covered {
            let all = |v: Verdict| decisions.iter().all(|d| d.verdict == v);
            let status = graph.edge(&edge_id).expect("checked").status;
            let modify = decisions.iter().find(|d| d.verdict == Verdict::Modify);
            if all(Verdict::Accept) {
                transitions.push(graph.set_status(&edge_id, EdgeStatus::Accepted)?);
            } else if all(Verdict::Reject) {
                transitions.push(graph.set_status(&edge_id, EdgeStatus::Rejected)?);
            } else if status == EdgeStatus::UnderValidation {
                if let Some(m) = modify {
                    let edge = graph.edge(&edge_id).expect("checked");
                    let change = m.modification.clone().unwrap_or_default();
                    let dst = change.new_dst.unwrap_or_else(|| edge.dst.clone());
                    let edge_type = change.new_edge_type.unwrap_or(edge.edge_type);
                    let rationale = format!(
                        "revision of {edge_id} by {} ({:?} review){}",
                        m.validator_id,
                        m.role,
                        if m.comment.is_empty() { String::new() } else { format!(": {}", m.comment) }
                    );
                    revised = Some(graph.add_revision(&edge_id, dst, edge_type, rationale)?);
                    transitions.push(graph.set_status(&edge_id, EdgeStatus::Superseded)?);
                } else {
                    transitions.push(graph.set_status(&edge_id, EdgeStatus::Adjudication)?);
                    graph.edge_mut(&edge_id)?.adjudication_rounds += 1;
                }
            } else {
                // Still split while in adjudication: another round.
                graph.edge_mut(&edge_id)?.adjudication_rounds += 1;
            }
        }
        if graph.edge(&edge_id).is_some_and(|e| e.status != EdgeStatus::UnderValidation) {
            self.queue.remove(&edge_id);
        }
        Ok(DecisionOutcome { edge: graph.edge(&edge_id).expect("checked").clone(), revised, transitions })
    }

    fn parallel_ids(r: &Resolution) -> Vec<EdgeId> {
        let mut ids = vec![r.edge_id.clone()];
        ids.extend(r.parallel_edges.iter().filter(|e| **e != r.edge_id).cloned());
        ids
    }

    pub fn check_resolution(&self, graph: &Graph, r: &Resolution) -> Result<()> {
        let edge = graph.edge(&r.edge_id).ok_or_else(|| Error::NotFound(format!("edge {}", r.edge_id)))?;
        if edge.status != EdgeStatus::Adjudication {
            return Err(Error::State(format!("edge {} is {:?}, not in Adjudication", r.edge_id, edge.status)));
        }
        if r.outcome == AdjudicationOutcome::RetainParallel {
            let ids = Self::parallel_ids(r);
            graph.check_parallel(&ids, &r.reasons)?;
            for id in &ids {
                let rounds = graph.edge(id).map_or(0, |e| e.adjudication_rounds);
                if rounds < self.config.adjudication_rounds {
                    return Err(Error::State(format!(
                        "edge {id} has had {rounds} adjudication round(s), {} required before parallel retention",
                        self.config.adjudication_rounds
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn resolve_adjudication(&mut self, graph: &mut Graph, r: &Resolution) -> Result<(Vec<Edge>, Vec<Transition>)> {
        self.check_resolution(graph, r)?;
        let note_text = r.note.clone().filter(|n| !n.trim().is_empty());
        let mut transitions = Vec::new();
        let ids = match r.outcome {
            AdjudicationOutcome::ConsensusAccept | AdjudicationOutcome::ConsensusReject => {
                let to = if r.outcome == AdjudicationOutcome::ConsensusAccept {
                    EdgeStatus::Accepted
                } else {
                    EdgeStatus::Rejected
                };
                transitions.push(graph.set_status(&r.edge_id, to)?);
                vec![r.edge_id.clone()]
            }
            AdjudicationOutcome::RetainParallel => {
                let ids = Self::parallel_ids(r);
                let before = graph.transitions().len();
                graph.retain_parallel(&ids, &r.reasons)?;
                transitions.extend_from_slice(&graph.transitions()[before..]);
                ids
            }
        };
        let default_note = match r.outcome {
            AdjudicationOutcome::ConsensusAccept => "consensus accept after adjudication",
            AdjudicationOutcome::ConsensusReject => "consensus reject after adjudication",
            AdjudicationOutcome::RetainParallel => "interpretations retained in parallel after adjudication",
        };
        let mut edges = Vec::new();
        for id in &ids {
            let edge = graph.edge_mut(id)?;
            edge.adjudication = Some(AdjudicationNote {
                outcome: r.outcome,
                note: note_text.clone().unwrap_or_else(|| default_note.to_owned()),
            });
            edges.push(edge.clone());
            self.queue.remove(id);
        }
        Ok((edges, transitions))
    }
}
