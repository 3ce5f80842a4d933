//! Intrinsic graph metrics, semantic coherence, and review-efficiency
//! measurement with a seeded validator simulator.

mod coherence;
mod connectivity;
mod simulate;

pub use coherence::semantic_coherence;
pub use connectivity::{connectivity_metrics, GraphMetrics};
pub use simulate::{
    hitl_efficiency, set_quality, simulate_run, simulate_seeds, simulate_validation, EfficiencyReport, Quality,
    ReviewPolicy, SimulationConfig,
};
