//! JSON interchange document: top-level `expressions`, `concepts` and `edges`
//! arrays, each sorted by id.

use serde::{Deserialize, Serialize};

use super::model::{ConceptNode, Edge, ExpressionNode};
use super::store::Graph;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub expressions: Vec<ExpressionNode>,
    pub concepts: Vec<ConceptNode>,
    pub edges: Vec<Edge>,
}

impl Graph {
    pub fn to_document(&self) -> GraphDocument {
        GraphDocument {
            expressions: self.expressions().cloned().collect(),
            concepts: self.concepts().cloned().collect(),
            edges: self.edges().cloned().collect(),
        }
    }

    pub fn from_document(doc: GraphDocument) -> Result<Graph> {
        let mut g = Graph::new();
        for (i, node) in doc.expressions.into_iter().enumerate() {
            let id = node.id.clone();
            g.insert_expression(node).map_err(|e| Error::parse(format!("expressions[{i}] ({id})"), e.to_string()))?;
        }
        for (i, node) in doc.concepts.into_iter().enumerate() {
            let id = node.id.clone();
            g.insert_concept(node).map_err(|e| Error::parse(format!("concepts[{i}] ({id})"), e.to_string()))?;
        }
        for (i, edge) in doc.edges.iter().enumerate() {
            for end in [&edge.src, &edge.dst] {
                if g.node(end).is_none() {
                    return Err(Error::parse(format!("edges[{i}] ({})", edge.id), format!("dangling endpoint {end}")));
                }
            }
            g.insert_edge(edge.clone())
                .map_err(|e| Error::parse(format!("edges[{i}] ({})", edge.id), e.to_string()))?;
        }
        let violations = g.integrity_violations();
        if let Some(v) = violations.first() {
            return Err(Error::parse("edges", v.clone()));
        }
        Ok(g)
    }

    /// Pretty-printed document with a trailing newline. Byte-stable across
    /// export/import cycles.
    pub fn export_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_document()).expect("graph serializes");
        s.push('\n');
        s
    }

    pub fn import_json(text: &str) -> Result<Graph> {
        let doc: GraphDocument = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        Graph::from_document(doc)
    }
}
