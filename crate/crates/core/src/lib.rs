//! Cross-lingual graph of idioms of distress linked to clinical and cultural
//! concepts, with embedding-based alignment, multi-role human review,
//! layered explanations and evaluation metrics.
//!
//! [`engine::Engine`] is the main entry point: it applies every change as an
//! event, so the full state can be rebuilt from its log.

pub mod align;
pub mod annotation;
pub mod engine;
pub mod error;
pub mod explain;
pub mod fixtures;
pub mod graph;
pub mod ids;
pub mod metrics;
pub mod par;
pub mod text;
pub mod workflow;

pub use error::{Error, Result};
