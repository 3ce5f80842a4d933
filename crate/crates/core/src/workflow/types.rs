use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EdgeType;
use crate::ids::{EdgeId, NodeId};

/// Expert review level. Ordering is the conventional review order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Linguistic,
    Clinical,
    Cultural,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Linguistic, Role::Clinical, Role::Cultural];
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linguistic" => Ok(Role::Linguistic),
            "clinical" => Ok(Role::Clinical),
            "cultural" => Ok(Role::Cultural),
            other => Err(Error::Validation(format!("unknown role {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accept,
    Reject,
    Modify,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modification {
    #[serde(default)]
    pub new_dst: Option<NodeId>,
    #[serde(default)]
    pub new_edge_type: Option<EdgeType>,
}

impl Modification {
    pub fn is_empty(&self) -> bool {
        self.new_dst.is_none() && self.new_edge_type.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationDecision {
    pub edge_id: EdgeId,
    pub validator_id: String,
    pub role: Role,
    pub verdict: Verdict,
    #[serde(default)]
    pub modification: Option<Modification>,
    #[serde(default)]
    pub comment: String,
    pub decided_at: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub edge_id: EdgeId,
    pub priority: f64,
    pub batch_key: String,
    pub enqueued_at: DateTime<Utc>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauBounds {
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkflowConfig {
    /// Weight of the model's confidence against validator agreement.
    pub alpha: f64,
    pub required_roles: BTreeSet<Role>,
    /// Similarity proposal threshold, moved by the feedback loop.
    pub tau: f64,
    pub eta: f64,
    pub target_reject_rate: f64,
    pub tau_bounds: TauBounds,
    /// Adjudication rounds an edge must go through before parallel retention.
    pub adjudication_rounds: u32,
}

impl Default for WorkflowConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            required_roles: Role::ALL.into_iter().collect(),
            tau: 0.70,
            eta: 0.1,
            target_reject_rate: 0.2,
            tau_bounds: TauBounds { min: 0.5, max: 0.95 },
            adjudication_rounds: 1,
        }
    }
}

impl WorkflowConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} must lie in [0,1], got {v}")))
            }
        };
        unit("alpha", self.alpha)?;
        unit("target_reject_rate", self.target_reject_rate)?;
        unit("tau_bounds.min", self.tau_bounds.min)?;
        unit("tau_bounds.max", self.tau_bounds.max)?;
        if self.tau_bounds.min > self.tau_bounds.max {
            return Err(Error::validation("tau_bounds.min exceeds tau_bounds.max"));
        }
        if !(self.tau >= self.tau_bounds.min && self.tau <= self.tau_bounds.max) {
            return Err(Error::Validation(format!(
                "tau {} outside tau_bounds [{}, {}]",
                self.tau, self.tau_bounds.min, self.tau_bounds.max
            )));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::Validation(format!("eta must be a non-negative number, got {}", self.eta)));
        }
        if self.required_roles.is_empty() {
            return Err(Error::validation("required_roles is empty"));
        }
        if self.adjudication_rounds == 0 {
            return Err(Error::validation("adjudication_rounds must be at least 1"));
        }
        Ok(())
    }
}
