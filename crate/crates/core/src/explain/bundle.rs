use serde::{Deserialize, Serialize};

use crate::ids::{EdgeId, NodeId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenContribution {
    pub token: String,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearestExample {
    pub edge_id: EdgeId,
    pub similarity: f64,
}

/// Why one candidate ranked above another from the same proposal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contrastive {
    pub chosen_dst: NodeId,
    pub runner_up_dst: NodeId,
    pub score_delta: f64,
    pub text: String,
}

/// Layered explanation persisted with an edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationBundle {
    pub edge_id: EdgeId,
    pub version: u32,
    pub linguistic: String,
    pub cultural: String,
    pub clinical: String,
    pub token_contributions: Vec<TokenContribution>,
    pub matched_rules: Vec<String>,
    pub nearest_examples: Vec<NearestExample>,
    pub contrastive: Option<Contrastive>,
    pub confidence: f64,
    pub provenance_refs: Vec<String>,
    /// Set when some inputs (annotation, counterpart text) were unavailable.
    pub incomplete: bool,
}

impl ExplanationBundle {
    pub fn perspectives_complete(&self) -> bool {
        [&self.linguistic, &self.cultural, &self.clinical].iter().all(|s| !s.trim().is_empty())
    }
}
