//! Edge lifecycle: review queues, decision aggregation, adjudication and
//! threshold feedback.

mod scoring;
mod state;
mod types;

pub use scoring::{combined_confidence, uncertainty, update_thresholds, validator_agreement};
pub use state::{batch_key, DecisionOutcome, Resolution, Workflow};
pub use types::{Modification, QueueItem, Role, TauBounds, ValidationDecision, Verdict, WorkflowConfig};
