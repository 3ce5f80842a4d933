use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::align::EmbeddingRecord;
use crate::error::{Error, Result};
use crate::explain::ExplanationBundle;
use crate::graph::{Edge, GraphDocument, Node};
use crate::ids::EdgeId;
use crate::workflow::{Resolution, ValidationDecision, WorkflowConfig};

/// A state change. Derived effects (revisions, status moves, queue removal)
/// are recomputed when the event is applied, so the log stays minimal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Event {
    ConfigUpdated(WorkflowConfig),
    NodeAdded(Node),
    EdgeAdded(Box<Edge>),
    EmbeddingRegistered(EmbeddingRecord),
    EdgeEnqueued { edge_id: EdgeId },
    DecisionSubmitted(ValidationDecision),
    AdjudicationResolved(Resolution),
    ThresholdUpdated { tau: f64 },
    BundleGenerated(Box<ExplanationBundle>),
    GraphImported(Box<GraphDocument>),
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::ConfigUpdated(_) => "config_updated",
            Event::NodeAdded(_) => "node_added",
            Event::EdgeAdded(_) => "edge_added",
            Event::EmbeddingRegistered(_) => "embedding_registered",
            Event::EdgeEnqueued { .. } => "edge_enqueued",
            Event::DecisionSubmitted(_) => "decision_submitted",
            Event::AdjudicationResolved(_) => "adjudication_resolved",
            Event::ThresholdUpdated { .. } => "threshold_updated",
            Event::BundleGenerated(_) => "bundle_generated",
            Event::GraphImported(_) => "graph_imported",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Gapless, starting at 1.
    pub sequence: u64,
    #[serde(flatten)]
    pub event: Event,
    pub at: DateTime<Utc>,
}

impl EventRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event records serialize")
    }
}

/// Parses a JSON Lines event log. Blank lines are skipped; errors name the
/// line and, when readable, the event sequence.
pub fn parse_event_log(text: &str) -> Result<Vec<EventRecord>> {
    let mut out: Vec<EventRecord> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord = serde_json::from_str(line).map_err(|e| {
            let seq = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("sequence").and_then(|s| s.as_u64()));
            let location = match seq {
                Some(s) => format!("line {} (event {s})", i + 1),
                None => format!("line {}", i + 1),
            };
            Error::parse(location, e.to_string())
        })?;
        let expected = out.last().map_or(1, |r| r.sequence + 1);
        if record.sequence != expected {
            return Err(Error::parse(
                format!("line {} (event {})", i + 1, record.sequence),
                format!("sequence gap: expected {expected}"),
            ));
        }
        out.push(record);
    }
    Ok(out)
}
