//! Bundled data files and deterministic fixture builders used by tests,
//! benches and the CLI demo.

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::align::{CandidateEdge, HASHED_PROVIDER_ID};
use crate::annotation::{AnnotationRecord, CulturalMarker, SemanticCategory, Severity, Temporal};
use crate::engine::{Engine, FixedClock, Services};
use crate::error::Result;
use crate::graph::{
    AdjudicationOutcome, EdgeType, Framework, NewConcept, NewEdge, NewExpression, NodeStatus, Provenance,
};
use crate::ids::{EdgeId, NodeId};
use crate::workflow::{Modification, Resolution, Role, ValidationDecision, Verdict};

pub const BUNDLED_LEXICON: &str = include_str!("../data/lexicon.json");
pub const BUNDLED_RULES: &str = include_str!("../data/rules.json");
pub const BUNDLED_CONCEPTS: &str = include_str!("../data/concepts.json");

pub fn bundled_concepts() -> Vec<NewConcept> {
    serde_json::from_str(BUNDLED_CONCEPTS).expect("bundled concepts are valid")
}

/// 2024-01-01T00:00:00Z
pub fn fixture_time() -> DateTime<Utc> {
    FixedClock::epoch().0
}

/// Services with a fixed clock, so fixture logs are reproducible.
pub fn fixture_services() -> Services {
    Services::default().with_clock(FixedClock::epoch())
}

pub fn annotation(category: SemanticCategory, annotator: &str) -> AnnotationRecord {
    AnnotationRecord {
        semantic_category: category,
        cultural_markers: [CulturalMarker::Idiomatic].into(),
        severity: Severity::Mild,
        temporal: Temporal::Unknown,
        annotator_confidence: 0.9,
        annotator_id: annotator.into(),
    }
}

pub fn synthetic_expression(text: &str, language: &str, category: SemanticCategory) -> NewExpression {
    NewExpression {
        surface_text: text.into(),
        language: language.into(),
        gloss: None,
        annotation: annotation(category, "fixture"),
        provenance: Provenance::synthetic("fixture", fixture_time()),
        status: NodeStatus::Active,
    }
}

pub fn add_bundled_concepts(engine: &mut Engine) -> Result<Vec<NodeId>> {
    bundled_concepts().into_iter().map(|c| engine.add_concept(c)).collect()
}

pub fn concept_id(engine: &Engine, code: &str, framework: Framework) -> NodeId {
    engine.graph().find_concept(code, framework).cloned().unwrap_or_else(|| panic!("fixture concept {code} missing"))
}

pub const PLANTED_LANGUAGES: [&str; 3] = ["hi", "kn", "mr"];

/// Tokens shared by every member of a cluster, in any language.
pub const PLANTED_CORES: [[&str; 4]; 2] =
    [["man", "udaas", "bhaari", "thakaan"], ["dil", "ghabraahat", "dhadkan", "pasina"]];

const PLANTED_UNIQUE: [&str; 30] = [
    "aaj",
    "roz",
    "hamesha",
    "subah",
    "raat",
    "indu",
    "yavaglu",
    "ratri",
    "belige",
    "dina",
    "aata",
    "nehmi",
    "sakali",
    "ratrit",
    "divas",
    "kal",
    "phir",
    "shaam",
    "dopahar",
    "abhi",
    "nale",
    "mattu",
    "sanje",
    "madhyana",
    "eega",
    "udya",
    "parat",
    "sandhyakali",
    "dupari",
    "aatta",
];

#[derive(Clone, Debug)]
pub struct PlantedMember {
    pub node: NodeId,
    pub language: String,
    pub cluster: usize,
    pub text: String,
}

/// Two clusters of five expressions per language across hi, kn and mr.
/// Each text is its cluster's four core tokens plus one token no other
/// text uses.
pub fn planted_texts() -> Vec<(String, String, usize)> {
    let mut out = Vec::new();
    let mut unique = PLANTED_UNIQUE.iter();
    for lang in PLANTED_LANGUAGES {
        for (cluster, core) in PLANTED_CORES.iter().enumerate() {
            for _ in 0..5 {
                let u = unique.next().expect("enough unique tokens");
                out.push((format!("{} {u}", core.join(" ")), lang.to_owned(), cluster));
            }
        }
    }
    out
}

/// Adds the planted expressions and registers their embeddings under the
/// bundled provider.
pub fn add_planted_clusters(engine: &mut Engine) -> Result<Vec<PlantedMember>> {
    let mut members = Vec::new();
    for (text, language, cluster) in planted_texts() {
        let category = if cluster == 0 { SemanticCategory::Emotion } else { SemanticCategory::SomaticComplaint };
        let node = engine.add_expression(synthetic_expression(&text, &language, category))?;
        members.push(PlantedMember { node, language, cluster, text });
    }
    engine.embed_expressions(HASHED_PROVIDER_ID)?;
    Ok(members)
}

pub fn decision(edge: &EdgeId, role: Role, verdict: Verdict) -> ValidationDecision {
    ValidationDecision {
        edge_id: edge.clone(),
        validator_id: format!("{role:?}-1").to_lowercase(),
        role,
        verdict,
        modification: None,
        comment: String::new(),
        decided_at: fixture_time(),
    }
}

/// Adds, enqueues and unanimously accepts one edge.
pub fn accept_edge(engine: &mut Engine, new: NewEdge) -> Result<EdgeId> {
    let edge = engine.add_edge(new)?;
    engine.enqueue(&edge.id)?;
    for role in Role::ALL {
        engine.submit_decision(decision(&edge.id, role, Verdict::Accept))?;
    }
    Ok(edge.id)
}

pub fn concept_edge(engine: &Engine, src: &NodeId, dst: &NodeId, confidence: f64) -> NewEdge {
    NewEdge {
        src: src.clone(),
        dst: dst.clone(),
        edge_type: EdgeType::ExpressionConcept,
        model_confidence: confidence,
        rationale: "fixture mapping".into(),
        provenance: engine
            .graph()
            .expression(src)
            .map(|e| e.provenance.clone())
            .unwrap_or_else(|| Provenance::synthetic("fixture", fixture_time())),
        proposer_id: Some("fixture".into()),
        alternatives: Vec::new(),
    }
}

/// Planted clusters with cluster 0 mapped to 6A70 and cluster 1 to 6B00
/// through accepted review.
pub fn planted_engine(services: Services) -> Result<(Engine, Vec<PlantedMember>)> {
    let mut engine = Engine::new(services);
    add_bundled_concepts(&mut engine)?;
    let members = add_planted_clusters(&mut engine)?;
    let targets = [concept_id(&engine, "6A70", Framework::ICD11), concept_id(&engine, "6B00", Framework::ICD11)];
    for m in &members {
        let new = concept_edge(&engine, &m.node, &targets[m.cluster], 0.8);
        accept_edge(&mut engine, new)?;
    }
    Ok((engine, members))
}

/// A graph exercising every edge status: accepted, rejected, superseded
/// with a revision, adjudicated, retained in parallel, plus open queue items.
pub fn showcase_engine(services: Services) -> Result<Engine> {
    let (mut engine, _) = planted_engine(services)?;
    let samples = [
        ("mujhe ghabraahat mehsoos ho rhi hai", "hi", SemanticCategory::Emotion),
        ("man ka bhoj", "hi", SemanticCategory::Emotion),
        ("mujhe stress mehsoos ho raha hai", "hi", SemanticCategory::Emotion),
        ("bahut tension hai ghar mein", "hi", SemanticCategory::Emotion),
        ("raat ko neend nahi aati", "hi", SemanticCategory::SomaticComplaint),
        ("dil baith raha hai", "hi", SemanticCategory::SomaticComplaint),
        ("ನನಗೆ ಆತಂಕ ಆಗುತ್ತಿದೆ", "kn", SemanticCategory::Emotion),
        ("मला खूप काळजी वाटते", "mr", SemanticCategory::Emotion),
    ];
    let mut ids = Vec::new();
    for (text, lang, cat) in samples {
        ids.push(engine.add_expression(synthetic_expression(text, lang, cat))?);
    }
    engine.embed_expressions(HASHED_PROVIDER_ID)?;
    let mut proposed = Vec::new();
    for id in &ids {
        proposed.extend(engine.propose_expression_concept(id)?);
    }
    let params = engine.similarity_params(None, Some(3), Some(0.8));
    proposed.extend(engine.propose_cross_lingual("hi", "kn", &params)?);
    let edges = engine.materialize(&proposed)?;
    engine.enqueue_proposed()?;

    let find = |src: &NodeId, code: &str, fw: Framework, engine: &Engine| -> Option<EdgeId> {
        let dst = engine.graph().find_concept(code, fw)?;
        engine.graph().find_edge(src, dst, EdgeType::ExpressionConcept).map(|e| e.id.clone())
    };
    let ghabraahat_gad = find(&ids[0], "6B00", Framework::ICD11, &engine);
    let ghabraahat_panic = find(&ids[0], "6B01", Framework::ICD11, &engine);
    let bhoj_dep = find(&ids[1], "6A70", Framework::ICD11, &engine);
    let bhoj_think = find(&ids[1], "CCD-THINKING-TOO-MUCH", Framework::CULTURAL, &engine);
    let stress = find(&ids[2], "6B43", Framework::ICD11, &engine);
    let tension_gad = find(&ids[3], "6B00", Framework::ICD11, &engine);

    let vote = |engine: &mut Engine, id: &EdgeId, verdicts: [Verdict; 3]| -> Result<()> {
        for (role, v) in Role::ALL.into_iter().zip(verdicts) {
            engine.submit_decision(decision(id, role, v))?;
        }
        Ok(())
    };
    use Verdict::{Accept, Reject};
    if let Some(id) = &ghabraahat_gad {
        vote(&mut engine, id, [Accept, Accept, Accept])?;
    }
    if let Some(id) = &ghabraahat_panic {
        vote(&mut engine, id, [Reject, Reject, Reject])?;
    }
    if let (Some(a), Some(b)) = (&bhoj_dep, &bhoj_think) {
        vote(&mut engine, a, [Accept, Reject, Accept])?;
        vote(&mut engine, b, [Accept, Accept, Reject])?;
        engine.resolve_adjudication(Resolution {
            edge_id: a.clone(),
            outcome: AdjudicationOutcome::RetainParallel,
            parallel_edges: vec![b.clone()],
            reasons: vec!["clinically reads as low mood".into(), "culturally voiced as ruminative burden".into()],
            note: None,
        })?;
    }
    if let Some(id) = &stress {
        engine.submit_decision(decision(id, Role::Linguistic, Accept))?;
        engine.submit_decision(ValidationDecision {
            modification: Some(Modification {
                new_dst: Some(concept_id(&engine, "CCD-TENSION", Framework::CULTURAL)),
                new_edge_type: None,
            }),
            comment: "everyday strain, not a disorder".into(),
            ..decision(id, Role::Clinical, Verdict::Modify)
        })?;
        engine.submit_decision(decision(id, Role::Cultural, Accept))?;
    }
    if let Some(id) = &tension_gad {
        vote(&mut engine, id, [Accept, Reject, Reject])?;
        engine.resolve_adjudication(Resolution {
            edge_id: id.clone(),
            outcome: AdjudicationOutcome::ConsensusReject,
            parallel_edges: Vec::new(),
            reasons: Vec::new(),
            note: Some("worry is situational here".into()),
        })?;
    }
    debug_assert!(!edges.is_empty());
    Ok(engine)
}

/// Candidate set with known ground truth for the review simulator.
#[derive(Clone, Debug)]
pub struct SimulationFixture {
    pub engine: Engine,
    pub candidates: Vec<CandidateEdge>,
    pub true_edge_set: BTreeSet<String>,
}

pub const SIMULATION_FIXTURE_SEED: u64 = 20_240_601;

/// 200 expression→concept candidates (40 expressions × 5 concepts). About
/// 40% are true; true scores are drawn from N(0.68, 0.18) and false ones from
/// N(0.32, 0.18), clipped to [0.01, 0.99].
pub fn simulation_fixture(services: Services) -> Result<SimulationFixture> {
    let mut engine = Engine::new(services);
    let concepts: Vec<NodeId> = add_bundled_concepts(&mut engine)?.into_iter().take(5).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(SIMULATION_FIXTURE_SEED);
    let true_dist = Normal::new(0.68, 0.18).expect("valid normal");
    let false_dist = Normal::new(0.32, 0.18).expect("valid normal");
    let mut candidates = Vec::new();
    let mut truth = BTreeSet::new();
    for i in 0..40 {
        let text = format!("anubhav {i:02}");
        let src = engine.add_expression(synthetic_expression(&text, "hi", SemanticCategory::Emotion))?;
        for dst in &concepts {
            let is_true = rng.random::<f64>() < 0.4;
            let score: f64 = if is_true { true_dist.sample(&mut rng) } else { false_dist.sample(&mut rng) };
            let c = CandidateEdge {
                src: src.clone(),
                dst: dst.clone(),
                edge_type: EdgeType::ExpressionConcept,
                score: score.clamp(0.01, 0.99),
                rationale: format!("simulated proposal for \"{text}\""),
                proposer_id: "simulated".into(),
            };
            if is_true {
                truth.insert(c.candidate_id());
            }
            candidates.push(c);
        }
    }
    Ok(SimulationFixture { engine, candidates, true_edge_set: truth })
}
