//! Typed heterogeneous graph of expression and concept nodes.

mod document;
mod model;
mod store;

pub use document::GraphDocument;
pub use model::*;
pub use store::{Graph, NewConcept, NewEdge, NewExpression, Prepared};
