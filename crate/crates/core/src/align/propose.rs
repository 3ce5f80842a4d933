use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::embedding::{l2, normalized_score, EmbeddingStore};
use crate::error::{Error, Result};
use crate::graph::{EdgeType, Graph};
use crate::ids::NodeId;
use crate::par::Execution;
use crate::text::normalize_language;

/// A proposed link awaiting materialization as a graph edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub edge_type: EdgeType,
    pub score: f64,
    pub rationale: String,
    pub proposer_id: String,
}

impl CandidateEdge {
    /// Stable identifier used by ground-truth files.
    pub fn candidate_id(&self) -> String {
        format!("{}>{}:{:?}", self.src, self.dst, self.edge_type)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParams {
    pub provider_id: String,
    pub k: usize,
    pub tau: f64,
}

struct Indexed<'a> {
    id: &'a NodeId,
    unit: Vec<f64>,
}

fn unit_vectors<'a>(graph: &'a Graph, store: &EmbeddingStore, provider_id: &str, language: &str) -> Vec<Indexed<'a>> {
    graph
        .expressions()
        .filter(|e| e.language == language)
        .filter_map(|e| {
            let v = store.get(provider_id, &e.id)?;
            let n = l2(v);
            Some(Indexed { id: &e.id, unit: v.iter().map(|x| x / n).collect() })
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// For each query node, its top-k targets with score ≥ tau (score desc, id asc).
fn top_k_pairs(
    queries: &[Indexed<'_>],
    targets: &[Indexed<'_>],
    params: &SimilarityParams,
    exec: Execution,
) -> Vec<Vec<(usize, usize, f64)>> {
    exec.map_range(queries.len(), |qi| {
        let q = &queries[qi];
        let mut hits: Vec<(usize, usize, f64)> = targets
            .iter()
            .enumerate()
            .filter(|(_, t)| t.id != q.id)
            .map(|(ti, t)| (qi, ti, normalized_score(dot(&q.unit, &t.unit).clamp(-1.0, 1.0))))
            .filter(|&(_, _, s)| s >= params.tau)
            .collect();
        hits.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| targets[a.1].id.cmp(targets[b.1].id)));
        hits.truncate(params.k);
        hits
    })
}

fn finish(mut pairs: BTreeMap<(NodeId, NodeId), f64>, edge_type: EdgeType, provider: &str) -> Vec<CandidateEdge> {
    let mut out: Vec<CandidateEdge> = std::mem::take(&mut pairs)
        .into_iter()
        .map(|((src, dst), score)| CandidateEdge {
            rationale: format!("embedding similarity {score:.3} between {src} and {dst} under provider {provider}"),
            src,
            dst,
            edge_type,
            score,
            proposer_id: format!("similarity:{provider}"),
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.src.cmp(&b.src)).then_with(|| a.dst.cmp(&b.dst)));
    out
}

/// Same-language neighbor proposals over registered embeddings.
pub fn propose_intra_lingual(
    graph: &Graph,
    store: &EmbeddingStore,
    language: &str,
    params: &SimilarityParams,
    exec: Execution,
) -> Result<Vec<CandidateEdge>> {
    check_params(params)?;
    let nodes = unit_vectors(graph, store, &params.provider_id, &normalize_language(language));
    let mut pairs = BTreeMap::new();
    for (qi, ti, s) in top_k_pairs(&nodes, &nodes, params, exec).into_iter().flatten() {
        let (a, b) = (nodes[qi].id, nodes[ti].id);
        let key = if a < b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
        pairs.insert(key, s);
    }
    Ok(finish(pairs, EdgeType::IntraLingual, &params.provider_id))
}

/// Proposals between `lang_a` and `lang_b` nodes, oriented a → b.
pub fn propose_cross_lingual(
    graph: &Graph,
    store: &EmbeddingStore,
    lang_a: &str,
    lang_b: &str,
    params: &SimilarityParams,
    exec: Execution,
) -> Result<Vec<CandidateEdge>> {
    check_params(params)?;
    let (lang_a, lang_b) = (normalize_language(lang_a), normalize_language(lang_b));
    if lang_a == lang_b {
        return Err(Error::Validation(format!("cross-lingual proposal needs two languages, got {lang_a} twice")));
    }
    let a = unit_vectors(graph, store, &params.provider_id, &lang_a);
    let b = unit_vectors(graph, store, &params.provider_id, &lang_b);
    let mut pairs = BTreeMap::new();
    for (qi, ti, s) in top_k_pairs(&a, &b, params, exec).into_iter().flatten() {
        pairs.insert((a[qi].id.clone(), b[ti].id.clone()), s);
    }
    for (qi, ti, s) in top_k_pairs(&b, &a, params, exec).into_iter().flatten() {
        pairs.insert((a[ti].id.clone(), b[qi].id.clone()), s);
    }
    Ok(finish(pairs, EdgeType::CrossLingual, &params.provider_id))
}

fn check_params(params: &SimilarityParams) -> Result<()> {
    if !(params.tau.is_finite() && (0.0..=1.0).contains(&params.tau)) {
        return Err(Error::Validation(format!("tau {} outside [0,1]", params.tau)));
    }
    Ok(())
}
