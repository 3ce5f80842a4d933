use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::annotation::AnnotationRecord;
use crate::explain::ExplanationBundle;
use crate::ids::{EdgeId, GroupId, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    CounselingTranscript,
    Helpline,
    Forum,
    CommunityHealth,
    ExpertInterview,
    Synthetic,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::CounselingTranscript => "counseling_transcript",
            SourceKind::Helpline => "helpline",
            SourceKind::Forum => "forum",
            SourceKind::CommunityHealth => "community_health",
            SourceKind::ExpertInterview => "expert_interview",
            SourceKind::Synthetic => "synthetic",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            SourceKind::CounselingTranscript => "counseling transcripts",
            SourceKind::Helpline => "helpline conversations",
            SourceKind::Forum => "online forums",
            SourceKind::CommunityHealth => "community health worker interactions",
            SourceKind::ExpertInterview => "expert interviews",
            SourceKind::Synthetic => "synthetic data",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_kind: SourceKind,
    pub source_id: String,
    pub collected_at: DateTime<Utc>,
    pub anonymized: bool,
}

impl Provenance {
    pub fn synthetic(source_id: impl Into<String>, collected_at: DateTime<Utc>) -> Self {
        Self { source_kind: SourceKind::Synthetic, source_id: source_id.into(), collected_at, anonymized: true }
    }

    /// Non-synthetic material must be anonymized before it enters the graph.
    pub fn check_policy(&self) -> crate::Result<()> {
        if self.source_kind != SourceKind::Synthetic && !self.anonymized {
            return Err(crate::Error::Policy(format!(
                "source {} ({:?}) is not anonymized",
                self.source_id, self.source_kind
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    #[default]
    Active,
    Provisional,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpressionNode {
    pub id: NodeId,
    pub surface_text: String,
    pub language: String,
    pub gloss: Option<String>,
    pub annotation: AnnotationRecord,
    pub provenance: Provenance,
    pub status: NodeStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Framework {
    ICD11,
    DSM5,
    CULTURAL,
}

impl std::fmt::Display for Framework {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Framework::ICD11 => "ICD-11",
            Framework::DSM5 => "DSM-5",
            Framework::CULTURAL => "Cultural Concepts of Distress",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptNode {
    pub id: NodeId,
    pub code: String,
    pub framework: Framework,
    pub label: String,
    pub description: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeType {
    IntraLingual,
    CrossLingual,
    ExpressionConcept,
}

impl EdgeType {
    /// Lingual edges are stored directed but read as undirected.
    pub fn is_symmetric(self) -> bool {
        !matches!(self, EdgeType::ExpressionConcept)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeStatus {
    Proposed,
    UnderValidation,
    Accepted,
    Rejected,
    Superseded,
    Adjudication,
    ParallelRetained,
}

impl EdgeStatus {
    pub const ALL: [EdgeStatus; 7] = [
        EdgeStatus::Proposed,
        EdgeStatus::UnderValidation,
        EdgeStatus::Accepted,
        EdgeStatus::Rejected,
        EdgeStatus::Superseded,
        EdgeStatus::Adjudication,
        EdgeStatus::ParallelRetained,
    ];

    /// The lifecycle transition table. Nothing outside it may be recorded.
    pub fn can_transition_to(self, to: EdgeStatus) -> bool {
        use EdgeStatus::*;
        matches!(
            (self, to),
            (Proposed, UnderValidation)
                | (UnderValidation, Accepted)
                | (UnderValidation, Rejected)
                | (UnderValidation, Superseded)
                | (UnderValidation, Adjudication)
                | (Adjudication, Accepted)
                | (Adjudication, Rejected)
                | (Adjudication, ParallelRetained)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            EdgeStatus::Accepted | EdgeStatus::Rejected | EdgeStatus::Superseded | EdgeStatus::ParallelRetained
        )
    }
}

/// Another candidate produced by the same proposal call, kept for contrastive explanations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub dst: NodeId,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjudicationOutcome {
    ConsensusAccept,
    ConsensusReject,
    RetainParallel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjudicationNote {
    pub outcome: AdjudicationOutcome,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub src: NodeId,
    pub dst: NodeId,
    pub edge_type: EdgeType,
    pub status: EdgeStatus,
    pub model_confidence: f64,
    pub validator_agreement: Option<f64>,
    pub combined_confidence: Option<f64>,
    pub rationale: String,
    pub provenance: Provenance,
    pub proposer_id: Option<String>,
    pub parallel_group: Option<GroupId>,
    pub parallel_reason: Option<String>,
    pub revision_of: Option<EdgeId>,
    pub adjudication: Option<AdjudicationNote>,
    pub adjudication_rounds: u32,
    pub alternatives: Vec<Alternative>,
    pub explanation: Option<ExplanationBundle>,
}

impl Edge {
    /// Confidence shown to users: combined when validators have weighed in.
    pub fn effective_confidence(&self) -> f64 {
        self.combined_confidence.unwrap_or(self.model_confidence)
    }

    pub fn other_end(&self, node: &NodeId) -> &NodeId {
        if &self.src == node {
            &self.dst
        } else {
            &self.src
        }
    }
}

/// Either endpoint kind, borrowed from the graph.
#[derive(Clone, Copy, Debug)]
pub enum NodeRef<'a> {
    Expression(&'a ExpressionNode),
    Concept(&'a ConceptNode),
}

impl NodeRef<'_> {
    pub fn id(&self) -> &NodeId {
        match self {
            NodeRef::Expression(e) => &e.id,
            NodeRef::Concept(c) => &c.id,
        }
    }

    /// Text used when embedding or displaying this node.
    pub fn text(&self) -> String {
        match self {
            NodeRef::Expression(e) => e.surface_text.clone(),
            NodeRef::Concept(c) => match &c.description {
                Some(d) => format!("{} {}", c.label, d),
                None => c.label.clone(),
            },
        }
    }
}

/// Owned node, as returned by queries and carried in events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node_kind", rename_all = "snake_case")]
pub enum Node {
    Expression(ExpressionNode),
    Concept(ConceptNode),
}

impl Node {
    pub fn id(&self) -> &NodeId {
        match self {
            Node::Expression(e) => &e.id,
            Node::Concept(c) => &c.id,
        }
    }
}

impl From<NodeRef<'_>> for Node {
    fn from(r: NodeRef<'_>) -> Self {
        match r {
            NodeRef::Expression(e) => Node::Expression(e.clone()),
            NodeRef::Concept(c) => Node::Concept(c.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub edge_id: EdgeId,
    pub from: EdgeStatus,
    pub to: EdgeStatus,
}
