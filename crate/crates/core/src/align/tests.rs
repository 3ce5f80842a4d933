use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::annotation::SemanticCategory;
use crate::error::Error;
use crate::fixtures::{bundled_concepts, synthetic_expression};
use crate::graph::{EdgeType, Graph};
use crate::ids::NodeId;
use crate::par::Execution;

fn setup(nodes: &[(&str, &str, Vec<f64>)]) -> (Graph, EmbeddingStore, Vec<NodeId>) {
    let mut g = Graph::new();
    let mut store = EmbeddingStore::default();
    let mut ids = Vec::new();
    for (text, lang, v) in nodes {
        let id = g.add_expression(synthetic_expression(text, lang, SemanticCategory::Emotion)).unwrap();
        store
            .register(EmbeddingRecord { node_id: id.clone(), dim: v.len(), vector: v.clone(), provider_id: "p".into() })
            .unwrap();
        ids.push(id);
    }
    (g, store, ids)
}

fn params(k: usize, tau: f64) -> SimilarityParams {
    SimilarityParams { provider_id: "p".into(), k, tau }
}

fn pairs(c: &[CandidateEdge]) -> BTreeSet<(NodeId, NodeId)> {
    c.iter().map(|c| (c.src.clone(), c.dst.clone())).collect()
}

#[test]
fn single_node_has_no_pairs() {
    let (g, s, _) = setup(&[("dil", "hi", vec![1.0, 0.0])]);
    assert!(propose_intra_lingual(&g, &s, "hi", &params(5, 0.0), Execution::Sequential).unwrap().is_empty());
}

#[test]
fn language_without_embeddings_is_empty() {
    let (g, s, _) = setup(&[("dil", "hi", vec![1.0, 0.0])]);
    assert!(propose_intra_lingual(&g, &s, "kn", &params(5, 0.0), Execution::Sequential).unwrap().is_empty());
}

#[test]
fn identical_vectors_make_one_candidate() {
    let (g, s, ids) = setup(&[("dil", "hi", vec![0.3, 0.4]), ("man", "hi", vec![0.3, 0.4])]);
    let c = propose_intra_lingual(&g, &s, "hi", &params(5, 0.9), Execution::Sequential).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!((&c[0].src, &c[0].dst), (&ids[0], &ids[1]));
    assert!((c[0].score - 1.0).abs() < 1e-12);
    assert_eq!(c[0].edge_type, EdgeType::IntraLingual);
    assert_eq!(c[0].proposer_id, "similarity:p");
}

fn planted_3_3() -> Vec<(&'static str, &'static str, Vec<f64>)> {
    vec![
        ("a1", "hi", vec![1.0, 0.05, 0.0, 0.0]),
        ("a2", "hi", vec![1.0, -0.05, 0.02, 0.0]),
        ("a3", "hi", vec![0.95, 0.0, -0.03, 0.01]),
        ("b1", "hi", vec![0.0, 0.0, 1.0, 0.05]),
        ("b2", "hi", vec![0.02, 0.0, 1.0, -0.05]),
        ("b3", "hi", vec![0.0, 0.03, 0.97, 0.0]),
    ]
}

/// All pairs whose normalized cosine reaches tau.
fn brute_force(vectors: &[Vec<f64>], tau: f64) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            if (cosine(&vectors[i], &vectors[j]).unwrap() + 1.0) / 2.0 >= tau {
                out.insert((i, j));
            }
        }
    }
    out
}

#[test]
fn planted_synthetic_clusters() {
    let nodes = planted_3_3();
    let (g, s, ids) = setup(&nodes);
    let c = propose_intra_lingual(&g, &s, "hi", &params(2, 0.8), Execution::Sequential).unwrap();
    let vectors: Vec<Vec<f64>> = nodes.iter().map(|n| n.2.clone()).collect();
    let expected: BTreeSet<(NodeId, NodeId)> =
        brute_force(&vectors, 0.8).into_iter().map(|(i, j)| (ids[i].clone(), ids[j].clone())).collect();
    assert_eq!(expected.len(), 6);
    assert_eq!(pairs(&c), expected);
    for w in c.windows(2) {
        assert!(w[0].score >= w[1].score);
    }
}

#[test]
fn cross_lingual_needs_two_languages() {
    let (g, s, _) = setup(&[("dil", "hi", vec![1.0, 0.0])]);
    let err = propose_cross_lingual(&g, &s, "hi", "HI", &params(5, 0.5), Execution::Sequential).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
}

#[test]
fn cross_lingual_identical_vectors() {
    let (g, s, ids) = setup(&[
        ("ghabraahat", "hi", vec![0.2, 0.9, 0.1]),
        ("ಆತಂಕ", "kn", vec![0.2, 0.9, 0.1]),
        ("dusra", "hi", vec![0.9, -0.2, 0.0]),
    ]);
    let c = propose_cross_lingual(&g, &s, "hi", "kn", &params(5, 0.9), Execution::Sequential).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!((&c[0].src, &c[0].dst, c[0].edge_type), (&ids[0], &ids[1], EdgeType::CrossLingual));
}

#[test]
fn disjoint_support_gives_nothing() {
    let (g, s, _) = setup(&[
        ("a", "hi", vec![1.0, 0.0, 0.0, 0.0]),
        ("b", "hi", vec![0.0, 1.0, 0.0, 0.0]),
        ("c", "kn", vec![0.0, 0.0, 1.0, 0.0]),
        ("d", "kn", vec![0.0, 0.0, 0.0, 1.0]),
    ]);
    let c = propose_cross_lingual(&g, &s, "hi", "kn", &params(5, 0.6), Execution::Sequential).unwrap();
    assert!(c.is_empty());
}

#[test]
fn tau_outside_unit_interval_rejected() {
    let (g, s, _) = setup(&[("dil", "hi", vec![1.0, 0.0])]);
    assert!(propose_intra_lingual(&g, &s, "hi", &params(5, 1.5), Execution::Sequential).is_err());
}

#[test]
fn strategies_agree_on_proposals() {
    let (g, s, _) = setup(&planted_3_3());
    let seq = propose_intra_lingual(&g, &s, "hi", &params(3, 0.5), Execution::Sequential).unwrap();
    let par = propose_intra_lingual(&g, &s, "hi", &params(3, 0.5), Execution::Parallel).unwrap();
    assert_eq!(seq, par);
}

fn concept_graph() -> (Graph, Vec<NodeId>) {
    let mut g = Graph::new();
    let ids = bundled_concepts().into_iter().map(|c| g.add_concept(c).unwrap()).collect();
    (g, ids)
}

#[test]
fn lexicon_maps_ghabraahat_to_anxiety() {
    let (mut g, _) = concept_graph();
    let id = g
        .add_expression(synthetic_expression("mujhe ghabraahat mehsoos ho rhi hai", "hi", SemanticCategory::Emotion))
        .unwrap();
    let p = LexiconProposer::bundled();
    let expr = g.expression(&id).unwrap();
    let concepts: Vec<_> = g.concepts().collect();
    let out = p.propose(expr, &concepts).unwrap();
    assert!(!out.is_empty());
    let top = g.concept(&out[0].dst).unwrap();
    assert_eq!(top.code, "6B00");
    assert!(top.label.to_lowercase().contains("anxiety"));
    assert!(out[0].rationale.contains("ghabraahat"));
    assert_eq!(out[0].proposer_id, "lexicon:bundled");
    for c in &out {
        assert!(!c.rationale.is_empty());
        assert!((0.0..=1.0).contains(&c.score));
    }
    assert_eq!(p.propose(expr, &concepts).unwrap(), out);
}

#[test]
fn lexicon_without_match_is_empty() {
    let (mut g, _) = concept_graph();
    let id = g
        .add_expression(synthetic_expression("aaj mausam accha hai", "hi", SemanticCategory::Other))
        .unwrap_or_else(|_| {
            let mut new = synthetic_expression("aaj mausam accha hai", "hi", SemanticCategory::Emotion);
            new.annotation.semantic_category = SemanticCategory::Emotion;
            g.add_expression(new).unwrap()
        });
    let concepts: Vec<_> = g.concepts().collect();
    let out = LexiconProposer::bundled().propose(g.expression(&id).unwrap(), &concepts).unwrap();
    assert!(out.is_empty());
}

#[test]
fn lexicon_respects_language_and_appends_missing_cue() {
    let (mut g, _) = concept_graph();
    let entries = vec![LexiconEntry {
        cue: "chinta".into(),
        language: "mr".into(),
        concept_code: "6B00".into(),
        framework: None,
        rationale_template: "worry maps to {label}".into(),
        base_confidence: 0.7,
    }];
    let p = LexiconProposer::new("lexicon:test", entries).unwrap();
    let hi = g.add_expression(synthetic_expression("chinta hai", "hi", SemanticCategory::Emotion)).unwrap();
    let mr = g.add_expression(synthetic_expression("chinta vatate", "mr", SemanticCategory::Emotion)).unwrap();
    let concepts: Vec<_> = g.concepts().collect();
    assert!(p.propose(g.expression(&hi).unwrap(), &concepts).unwrap().is_empty());
    let out = p.propose(g.expression(&mr).unwrap(), &concepts).unwrap();
    assert_eq!(out.len(), 1);
    assert!(out[0].rationale.contains("matched cue \"chinta\""), "{}", out[0].rationale);
}

#[test]
fn lexicon_validation() {
    let base = LexiconEntry {
        cue: "dil".into(),
        language: "*".into(),
        concept_code: "X".into(),
        framework: None,
        rationale_template: "{cue}".into(),
        base_confidence: 0.5,
    };
    let bad = |f: &dyn Fn(&mut LexiconEntry)| {
        let mut e = base.clone();
        f(&mut e);
        LexiconProposer::new("t", vec![e]).is_err()
    };
    assert!(bad(&|e| e.cue = " ".into()));
    assert!(bad(&|e| e.base_confidence = 1.2));
    assert!(bad(&|e| e.rationale_template = "{nope}".into()));
    assert!(bad(&|e| e.rationale_template = "{cue".into()));
    assert!(!bad(&|_| {}));
    assert!(matches!(LexiconProposer::from_json("t", "[{]"), Err(Error::Parse { .. })));
}

fn random_space() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec(-1.0f64..1.0, 4).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3)),
        2..12,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn candidates_shrink_as_tau_grows(
        vectors in random_space(),
        t1 in 0.0f64..=1.0,
        t2 in 0.0f64..=1.0,
        k in 1usize..6,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let nodes: Vec<(String, &str, Vec<f64>)> =
            vectors.iter().enumerate().map(|(i, v)| (format!("t{i}"), "hi", v.clone())).collect();
        let refs: Vec<(&str, &str, Vec<f64>)> = nodes.iter().map(|(t, l, v)| (t.as_str(), *l, v.clone())).collect();
        let (g, s, _) = setup(&refs);
        let a = pairs(&propose_intra_lingual(&g, &s, "hi", &params(k, lo), Execution::Sequential).unwrap());
        let b = pairs(&propose_intra_lingual(&g, &s, "hi", &params(k, hi), Execution::Sequential).unwrap());
        prop_assert!(b.is_subset(&a));
    }

    #[test]
    fn unlimited_k_matches_brute_force(vectors in random_space(), tau in 0.0f64..=1.0) {
        let nodes: Vec<(String, &str, Vec<f64>)> =
            vectors.iter().enumerate().map(|(i, v)| (format!("t{i}"), "hi", v.clone())).collect();
        let refs: Vec<(&str, &str, Vec<f64>)> = nodes.iter().map(|(t, l, v)| (t.as_str(), *l, v.clone())).collect();
        let (g, s, ids) = setup(&refs);
        let got = propose_intra_lingual(&g, &s, "hi", &params(vectors.len(), tau), Execution::Sequential).unwrap();
        let mut expected = BTreeSet::new();
        let mut borderline = BTreeSet::new();
        for i in 0..vectors.len() {
            for j in i + 1..vectors.len() {
                let score = (cosine(&vectors[i], &vectors[j]).unwrap() + 1.0) / 2.0;
                if (score - tau).abs() < 1e-12 {
                    borderline.insert((ids[i].clone(), ids[j].clone()));
                } else if score >= tau {
                    expected.insert((ids[i].clone(), ids[j].clone()));
                }
            }
        }
        let got = pairs(&got);
        prop_assert!(expected.is_subset(&got));
        prop_assert!(got.difference(&expected).all(|p| borderline.contains(p)));
    }
}
