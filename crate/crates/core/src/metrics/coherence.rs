use std::collections::{BTreeMap, BTreeSet};

use crate::align::cosine;
use crate::error::Result;
use crate::graph::{EdgeStatus, EdgeType, Graph};
use crate::ids::NodeId;
use crate::par::Execution;

/// Concepts reached from each expression through Accepted expression→concept edges.
fn accepted_concepts(graph: &Graph) -> BTreeMap<&NodeId, BTreeSet<&NodeId>> {
    let mut out: BTreeMap<&NodeId, BTreeSet<&NodeId>> = BTreeMap::new();
    for e in graph.edges() {
        if e.edge_type == EdgeType::ExpressionConcept && e.status == EdgeStatus::Accepted {
            out.entry(&e.src).or_default().insert(&e.dst);
        }
    }
    out
}

/// Mean pairwise cosine among expressions sharing an accepted concept minus
/// the mean over linked expressions that share none.
///
/// `None` when either pair set is empty (no concept with two expressions, or
/// no second concept to contrast with).
pub fn semantic_coherence<F>(graph: &Graph, vector_for: F, exec: Execution) -> Result<Option<f64>>
where
    F: Fn(&NodeId) -> Result<Vec<f64>> + Sync,
{
    let links = accepted_concepts(graph);
    let nodes: Vec<(&NodeId, BTreeSet<&NodeId>)> = links.into_iter().collect();
    let vectors = exec.map(&nodes, |(id, _)| vector_for(id)).into_iter().collect::<Result<Vec<_>>>()?;
    let rows: Vec<Result<(f64, usize, f64, usize)>> = exec.map_range(nodes.len(), |i| {
        let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0, 0.0, 0);
        for j in i + 1..nodes.len() {
            let c = cosine(&vectors[i], &vectors[j])?;
            if nodes[i].1.is_disjoint(&nodes[j].1) {
                inter += c;
                n_inter += 1;
            } else {
                intra += c;
                n_intra += 1;
            }
        }
        Ok((intra, n_intra, inter, n_inter))
    });
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0usize, 0.0, 0usize);
    for r in rows {
        let (a, na, b, nb) = r?;
        intra += a;
        n_intra += na;
        inter += b;
        n_inter += nb;
    }
    if n_intra == 0 || n_inter == 0 {
        return Ok(None);
    }
    Ok(Some(intra / n_intra as f64 - inter / n_inter as f64))
}
