use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::align::CandidateEdge;
use crate::engine::{Engine, Event, EventRecord, Services};
use crate::error::{check_unit, Error, Result};
use crate::graph::{AdjudicationOutcome, Edge, EdgeStatus, Graph};
use crate::ids::EdgeId;
use crate::par::Execution;
use crate::workflow::{Resolution, Role, ValidationDecision, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewPolicy {
    /// Most uncertain first, in workflow batches.
    Active,
    /// Seeded shuffle of the candidates.
    Random,
}

fn default_target_f1() -> f64 {
    0.9
}

fn default_batch_size() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub seed: u64,
    /// Candidate ids (see [`CandidateEdge::candidate_id`]) that are correct.
    pub true_edge_set: BTreeSet<String>,
    /// Probability that a simulated validator votes correctly.
    pub validator_accuracy: f64,
    pub policy: ReviewPolicy,
    /// Review stops once the accepted set reaches this F1.
    #[serde(default = "default_target_f1")]
    pub target_f1: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    /// Validator decisions plus adjudication resolutions.
    pub decisions_used: usize,
    pub accepted_edges: usize,
    pub reviewed_edges: usize,
    pub accepted_edge_precision: Option<f64>,
    pub accepted_edge_recall: Option<f64>,
    pub f1: Option<f64>,
    pub decisions_per_accepted_edge: f64,
    pub reached_target: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quality {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision is 1 for an empty selection and recall is 1 for an empty truth set.
pub fn set_quality<T: Ord>(selected: &BTreeSet<T>, truth: &BTreeSet<T>) -> Quality {
    let hits = selected.intersection(truth).count() as f64;
    let precision = if selected.is_empty() { 1.0 } else { hits / selected.len() as f64 };
    let recall = if truth.is_empty() { 1.0 } else { hits / truth.len() as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Quality { precision, recall, f1 }
}

fn per_accepted(decisions: usize, accepted: usize) -> f64 {
    if accepted == 0 {
        0.0
    } else {
        decisions as f64 / accepted as f64
    }
}

/// Edges the pipeline currently treats as accepted: those validators
/// accepted, plus still-unreviewed ones the model scores at 0.5 or above.
/// Once every candidate is reviewed this is exactly the Accepted set.
fn effective_accepted(graph: &Graph, edges: &[EdgeId], untouched: &BTreeSet<EdgeId>) -> BTreeSet<EdgeId> {
    edges
        .iter()
        .filter(|id| {
            let e = graph.edge(id).expect("simulated edge exists");
            e.status == EdgeStatus::Accepted
                || (untouched.contains(*id) && e.status == EdgeStatus::UnderValidation && e.model_confidence >= 0.5)
        })
        .cloned()
        .collect()
}

struct Sim<'a> {
    engine: Engine,
    config: &'a SimulationConfig,
    truth: BTreeSet<EdgeId>,
    rng: ChaCha8Rng,
    decisions: usize,
}

impl Sim<'_> {
    fn review(&mut self, edge_id: &EdgeId) -> Result<()> {
        let correct = self.truth.contains(edge_id);
        let roles: Vec<Role> = self.engine.config().required_roles.iter().copied().collect();
        let mut accepts = 0;
        for role in &roles {
            let right = self.rng.random::<f64>() < self.config.validator_accuracy;
            let accept = correct == right;
            accepts += usize::from(accept);
            self.engine.submit_decision(ValidationDecision {
                edge_id: edge_id.clone(),
                validator_id: format!("sim-{role:?}").to_lowercase(),
                role: *role,
                verdict: if accept { Verdict::Accept } else { Verdict::Reject },
                modification: None,
                comment: String::new(),
                decided_at: self.engine.services().clock.now(),
            })?;
            self.decisions += 1;
        }
        if self.engine.graph().edge(edge_id).map(|e| e.status) == Some(EdgeStatus::Adjudication) {
            let outcome = if 2 * accepts > roles.len() {
                AdjudicationOutcome::ConsensusAccept
            } else {
                AdjudicationOutcome::ConsensusReject
            };
            self.engine.resolve_adjudication(Resolution {
                edge_id: edge_id.clone(),
                outcome,
                parallel_edges: Vec::new(),
                reasons: Vec::new(),
                note: Some("simulated majority vote".into()),
            })?;
            self.decisions += 1;
        }
        Ok(())
    }
}

/// Drives the real review workflow with simulated validators and returns
/// the report together with the final engine.
pub fn simulate_run(
    base: &Engine,
    config: &SimulationConfig,
    candidates: &[CandidateEdge],
) -> Result<(EfficiencyReport, Engine)> {
    check_unit("validator_accuracy", config.validator_accuracy)?;
    check_unit("target_f1", config.target_f1)?;
    if config.batch_size == 0 {
        return Err(Error::validation("batch_size must be at least 1"));
    }
    let ids: BTreeSet<String> = candidates.iter().map(CandidateEdge::candidate_id).collect();
    if let Some(missing) = config.true_edge_set.iter().find(|t| !ids.contains(*t)) {
        return Err(Error::Validation(format!("true edge {missing} is not among the candidates")));
    }
    if candidates.is_empty() {
        let report = EfficiencyReport {
            accepted_edge_precision: Some(0.0),
            accepted_edge_recall: Some(0.0),
            f1: Some(0.0),
            reached_target: Some(false),
            ..Default::default()
        };
        return Ok((report, base.clone()));
    }

    let mut engine = base.clone();
    let edges = engine.materialize(candidates)?;
    let mut by_candidate: BTreeMap<String, EdgeId> = BTreeMap::new();
    for (c, e) in candidates.iter().zip(&edges) {
        if e.status != EdgeStatus::Proposed {
            return Err(Error::State(format!(
                "candidate {} maps to edge {} which is already {:?}",
                c.candidate_id(),
                e.id,
                e.status
            )));
        }
        by_candidate.insert(c.candidate_id(), e.id.clone());
    }
    let edge_ids: Vec<EdgeId> = by_candidate.values().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let truth: BTreeSet<EdgeId> = config.true_edge_set.iter().map(|t| by_candidate[t].clone()).collect();
    for id in &edge_ids {
        engine.enqueue(id)?;
    }

    let mut sim = Sim { engine, config, truth, rng: ChaCha8Rng::seed_from_u64(config.seed), decisions: 0 };
    let mut order = edge_ids.clone();
    if config.policy == ReviewPolicy::Random {
        order.shuffle(&mut sim.rng);
    }
    let mut cursor = 0;
    let mut untouched: BTreeSet<EdgeId> = edge_ids.iter().cloned().collect();
    let mut quality = set_quality(&effective_accepted(sim.engine.graph(), &edge_ids, &untouched), &sim.truth);

    while quality.f1 < config.target_f1 {
        let batch: Vec<EdgeId> = match config.policy {
            ReviewPolicy::Active => {
                sim.engine.next_batch(Role::Linguistic, config.batch_size)?.into_iter().map(|q| q.edge_id).collect()
            }
            ReviewPolicy::Random => {
                let mut batch = Vec::new();
                while batch.len() < config.batch_size && cursor < order.len() {
                    let id = &order[cursor];
                    cursor += 1;
                    if untouched.contains(id) {
                        batch.push(id.clone());
                    }
                }
                batch
            }
        };
        if batch.is_empty() {
            break;
        }
        for id in &batch {
            untouched.remove(id);
            sim.review(id)?;
        }
        quality = set_quality(&effective_accepted(sim.engine.graph(), &edge_ids, &untouched), &sim.truth);
    }

    let accepted_edges = edge_ids
        .iter()
        .filter(|id| sim.engine.graph().edge(id).is_some_and(|e| e.status == EdgeStatus::Accepted))
        .count();
    let report = EfficiencyReport {
        decisions_used: sim.decisions,
        accepted_edges,
        reviewed_edges: edge_ids.len() - untouched.len(),
        accepted_edge_precision: Some(quality.precision),
        accepted_edge_recall: Some(quality.recall),
        f1: Some(quality.f1),
        decisions_per_accepted_edge: per_accepted(sim.decisions, accepted_edges),
        reached_target: Some(quality.f1 >= config.target_f1),
    };
    Ok((report, sim.engine))
}

/// See [`simulate_run`].
pub fn simulate_validation(
    base: &Engine,
    config: &SimulationConfig,
    candidates: &[CandidateEdge],
) -> Result<EfficiencyReport> {
    simulate_run(base, config, candidates).map(|(r, _)| r)
}

/// Independent runs, one per seed, in seed order.
pub fn simulate_seeds(
    base: &Engine,
    config: &SimulationConfig,
    candidates: &[CandidateEdge],
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<EfficiencyReport>> {
    exec.map(seeds, |&seed| {
        let config = SimulationConfig { seed, ..config.clone() };
        simulate_validation(base, &config, candidates)
    })
    .into_iter()
    .collect()
}

fn edge_candidate_id(e: &Edge) -> String {
    format!("{}>{}:{:?}", e.src, e.dst, e.edge_type)
}

/// Efficiency of a recorded review session. Precision and recall are
/// filled only when `truth` (candidate ids) is given.
pub fn hitl_efficiency(records: &[EventRecord], truth: Option<&BTreeSet<String>>) -> Result<EfficiencyReport> {
    let engine = Engine::replay(Services::default(), records)?;
    let mut reviewed = BTreeSet::new();
    let mut decisions = 0;
    for r in records {
        match &r.event {
            Event::DecisionSubmitted(d) => {
                decisions += 1;
                reviewed.insert(d.edge_id.clone());
            }
            Event::AdjudicationResolved(_) => decisions += 1,
            _ => {}
        }
    }
    let accepted: BTreeSet<String> =
        engine.graph().edges().filter(|e| e.status == EdgeStatus::Accepted).map(edge_candidate_id).collect();
    let quality = truth.map(|t| set_quality(&accepted, t));
    Ok(EfficiencyReport {
        decisions_used: decisions,
        accepted_edges: accepted.len(),
        reviewed_edges: reviewed.len(),
        accepted_edge_precision: quality.map(|q| q.precision),
        accepted_edge_recall: quality.map(|q| q.recall),
        f1: quality.map(|q| q.f1),
        decisions_per_accepted_edge: per_accepted(decisions, accepted.len()),
        reached_target: None,
    })
}
