use crate::align::{cosine, render, CandidateEdge, EmbeddingProvider, EmbeddingStore};
use crate::annotation::{AnnotationRecord, CulturalMarker, SemanticCategory, Severity, Temporal};
use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeStatus, EdgeType, ExpressionNode, Framework, Graph, NodeRef};
use crate::ids::NodeId;
use crate::par::Execution;

use super::bundle::*;
use super::rules::{Perspective, RuleSet};

/// Read-only inputs for explanation generation.
#[derive(Clone, Copy)]
pub struct ExplainContext<'a> {
    pub graph: &'a Graph,
    pub embeddings: &'a EmbeddingStore,
    pub provider: &'a dyn EmbeddingProvider,
    pub rules: &'a RuleSet,
    pub nearest_k: usize,
    pub exec: Execution,
}

impl ExplainContext<'_> {
    /// Registered vector for `node`, else the provider's embedding of its text.
    pub fn vector_for(&self, node: &NodeId) -> Result<Vec<f64>> {
        if let Some(v) = self.embeddings.get(self.provider.id(), node) {
            return Ok(v.to_vec());
        }
        let n = self.graph.node(node).ok_or_else(|| Error::NotFound(format!("node {node}")))?;
        self.provider.embed(&n.text())
    }
}

/// Leave-one-token-out attribution of `src_text`'s similarity to `counterpart_text`.
///
/// Each token occurrence scores `sim(full) − sim(text without it)`; removing the
/// only token leaves an empty text whose similarity is taken as 0.
pub fn token_contributions(
    provider: &dyn EmbeddingProvider,
    src_text: &str,
    counterpart_text: &str,
) -> Result<Vec<TokenContribution>> {
    let tokens = provider.tokens(src_text);
    if tokens.is_empty() {
        return Ok(Vec::new());
    }
    let target = provider.embed(counterpart_text)?;
    let full = cosine(&provider.embed(src_text)?, &target)?;
    tokens
        .iter()
        .enumerate()
        .map(|(i, tok)| {
            let rest: Vec<&str> = tokens.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, t)| t.as_str()).collect();
            let without = if rest.is_empty() { 0.0 } else { cosine(&provider.embed(&rest.join(" "))?, &target)? };
            Ok(TokenContribution { token: tok.clone(), score: full - without })
        })
        .collect()
}

/// Top-k Accepted edges whose source is most similar to `edge`'s source.
pub fn nearest_validated_examples(ctx: &ExplainContext<'_>, edge: &Edge, k: usize) -> Result<Vec<NearestExample>> {
    let accepted: Vec<&Edge> =
        ctx.graph.edges().filter(|e| e.status == EdgeStatus::Accepted && e.id != edge.id).collect();
    if accepted.is_empty() || k == 0 {
        return Ok(Vec::new());
    }
    let query = ctx.vector_for(&edge.src)?;
    let scored: Vec<Result<NearestExample>> = ctx.exec.map(&accepted, |e| {
        let v = ctx.vector_for(&e.src)?;
        Ok(NearestExample { edge_id: e.id.clone(), similarity: cosine(&query, &v)? })
    });
    let mut out = scored.into_iter().collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| b.similarity.total_cmp(&a.similarity).then_with(|| a.edge_id.cmp(&b.edge_id)));
    out.truncate(k);
    Ok(out)
}

fn display(graph: &Graph, id: &NodeId) -> String {
    match graph.node(id) {
        Some(NodeRef::Concept(c)) => format!("{} ({} {})", c.label, c.framework, c.code),
        Some(NodeRef::Expression(e)) => format!("\"{}\" [{}]", e.surface_text, e.language),
        None => id.to_string(),
    }
}

/// Contrast between two candidates for the same source.
pub fn contrastive(graph: &Graph, chosen: &CandidateEdge, runner_up: &CandidateEdge) -> Result<Contrastive> {
    if chosen.src != runner_up.src {
        return Err(Error::Validation(format!("contrast needs a shared source ({} vs {})", chosen.src, runner_up.src)));
    }
    if chosen.score < runner_up.score {
        return Err(Error::Validation(format!(
            "chosen score {} is below runner-up score {}",
            chosen.score, runner_up.score
        )));
    }
    let delta = chosen.score - runner_up.score;
    let (a, b) = (display(graph, &chosen.dst), display(graph, &runner_up.dst));
    let text = if delta == 0.0 {
        format!("{a} and {b} are tied at {:.3}; neither is preferred by the proposer.", chosen.score)
    } else {
        format!("{a} was ranked above {b} ({:.3} vs {:.3}, a margin of {delta:.3}).", chosen.score, runner_up.score)
    };
    Ok(Contrastive { chosen_dst: chosen.dst.clone(), runner_up_dst: runner_up.dst.clone(), score_delta: delta, text })
}

fn category_phrase(c: SemanticCategory) -> &'static str {
    match c {
        SemanticCategory::Emotion => "an emotional expression",
        SemanticCategory::SomaticComplaint => "a somatic complaint",
        SemanticCategory::Behavior => "a behavioral description",
        SemanticCategory::Other => "an expression of distress",
    }
}

fn marker_word(m: CulturalMarker) -> &'static str {
    match m {
        CulturalMarker::Idiomatic => "idiomatic",
        CulturalMarker::Metaphorical => "metaphorical",
        CulturalMarker::BeliefSystemReference => "belief-system",
        CulturalMarker::CodeMixed => "code-mixed",
    }
}

fn join_words(words: &[&str]) -> String {
    match words {
        [] => String::new(),
        [one] => (*one).to_owned(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn severity_word(s: Severity) -> &'static str {
    match s {
        Severity::Mild => "mild",
        Severity::Severe => "severe",
        Severity::Unknown => "unrated",
    }
}

fn temporal_word(t: Temporal) -> &'static str {
    match t {
        Temporal::Acute => "acute",
        Temporal::Chronic => "chronic",
        Temporal::Unknown => "unrated",
    }
}

const CAVEAT: &str = "On its own the expression is not diagnostic; a clinician has to weigh it in context.";

struct Parts<'a> {
    expr: &'a ExpressionNode,
    edge: &'a Edge,
    counterpart: Option<NodeRef<'a>>,
}

fn rule_sentences(
    ctx: &ExplainContext<'_>,
    p: &Parts<'_>,
    perspective: Perspective,
    label: &str,
) -> (Vec<String>, Vec<String>) {
    let a = &p.expr.annotation;
    let mut ids = Vec::new();
    let mut lines = Vec::new();
    for r in ctx.rules.matching(&p.expr.surface_text, &p.expr.language) {
        if r.perspective != perspective {
            continue;
        }
        ids.push(r.rule_id.clone());
        lines.push(render(
            &r.template,
            &[
                ("text", &p.expr.surface_text),
                ("pattern", &r.pattern),
                ("language", &p.expr.language),
                ("label", label),
                ("category", category_phrase(a.semantic_category)),
                ("severity", severity_word(a.severity)),
                ("temporal", temporal_word(a.temporal)),
            ],
        ));
    }
    (ids, lines)
}

fn linguistic(p: &Parts<'_>, top_token: Option<&TokenContribution>) -> String {
    let a: &AnnotationRecord = &p.expr.annotation;
    let markers: Vec<&str> = a
        .cultural_markers
        .iter()
        .filter(|m| **m != CulturalMarker::BeliefSystemReference)
        .map(|m| marker_word(*m))
        .collect();
    let mut s = format!(
        "\"{}\" [{}] is annotated as {}",
        p.expr.surface_text,
        p.expr.language,
        category_phrase(a.semantic_category)
    );
    if markers.is_empty() {
        s.push('.');
    } else {
        s.push_str(&format!(" with {} usage.", join_words(&markers)));
    }
    match (p.edge.edge_type, p.counterpart) {
        (EdgeType::IntraLingual, Some(NodeRef::Expression(o))) => {
            s.push_str(&format!(" It is linked to \"{}\" as a same-language variant.", o.surface_text))
        }
        (EdgeType::CrossLingual, Some(NodeRef::Expression(o))) => s.push_str(&format!(
            " It is aligned with the [{}] expression \"{}\" as a cross-lingual equivalent.",
            o.language, o.surface_text
        )),
        (EdgeType::ExpressionConcept, Some(NodeRef::Concept(c))) => {
            s.push_str(&format!(" It is mapped onto the clinical label \"{}\".", c.label))
        }
        _ => {}
    }
    if let Some(t) = top_token.filter(|t| t.score > 0.0) {
        s.push_str(&format!(" The token \"{}\" contributes most to the match.", t.token));
    }
    s
}

fn cultural(p: &Parts<'_>) -> String {
    let a = &p.expr.annotation;
    let mut s =
        format!("Recorded from {} among [{}] speakers.", p.expr.provenance.source_kind.describe(), p.expr.language);
    if a.cultural_markers.contains(&CulturalMarker::BeliefSystemReference) {
        s.push_str(" The phrase draws on a belief system, so its sense depends on the speaker's cultural frame.");
    }
    if a.cultural_markers.contains(&CulturalMarker::CodeMixed) {
        s.push_str(" It switches between languages, as everyday speech often does.");
    }
    if a.cultural_markers.contains(&CulturalMarker::Idiomatic)
        || a.cultural_markers.contains(&CulturalMarker::Metaphorical)
    {
        s.push_str(" It is used figuratively rather than literally.");
    }
    if a.cultural_markers.is_empty() {
        s.push_str(" No cultural markers were annotated for it.");
    }
    if let Some(NodeRef::Concept(c)) = p.counterpart {
        if c.framework == Framework::CULTURAL {
            s.push_str(" The target is itself a culturally defined category of distress.");
        }
    }
    s
}

fn clinical(ctx: &ExplainContext<'_>, p: &Parts<'_>) -> String {
    let a = &p.expr.annotation;
    let mut s = match p.counterpart {
        Some(NodeRef::Concept(c)) => {
            let when = match a.temporal {
                Temporal::Acute => "as an acute presentation",
                Temporal::Chronic => "given its chronic profile",
                Temporal::Unknown => "if it persists",
            };
            format!(
                "It may relate to {} ({} {}) {when}; annotated severity is {}.",
                c.label,
                c.framework,
                c.code,
                severity_word(a.severity)
            )
        }
        _ => {
            let mut labels: Vec<String> = [&p.edge.src, &p.edge.dst]
                .iter()
                .flat_map(|n| ctx.graph.neighbors(n, Some(EdgeType::ExpressionConcept), None).unwrap_or_default())
                .filter(|(e, _)| e.status == EdgeStatus::Accepted)
                .filter_map(|(e, _)| ctx.graph.concept(&e.dst).map(|c| c.label.clone()))
                .collect();
            labels.sort();
            labels.dedup();
            if labels.is_empty() {
                "Neither expression has an accepted clinical mapping yet.".to_owned()
            } else {
                format!("Accepted clinical mappings of the pair: {}.", labels.join(", "))
            }
        }
    };
    s.push(' ');
    s.push_str(CAVEAT);
    s
}

/// Assembles a bundle from annotation metadata, rules, attribution, validated
/// examples and the proposal's alternatives.
pub fn generate_bundle(ctx: &ExplainContext<'_>, edge: &Edge, version: u32) -> Result<ExplanationBundle> {
    let expr =
        ctx.graph.expression(&edge.src).ok_or_else(|| Error::NotFound(format!("source expression {}", edge.src)))?;
    let counterpart = ctx.graph.node(&edge.dst);
    let mut incomplete = counterpart.is_none() || !expr.annotation.is_informative();
    let parts = Parts { expr, edge, counterpart };

    let tokens = match counterpart {
        Some(c) => token_contributions(ctx.provider, &expr.surface_text, &c.text()).unwrap_or_else(|_| {
            incomplete = true;
            Vec::new()
        }),
        None => Vec::new(),
    };
    let top = tokens.iter().max_by(|a, b| a.score.total_cmp(&b.score).then_with(|| b.token.cmp(&a.token)));

    let label = match counterpart {
        Some(NodeRef::Concept(c)) => c.label.clone(),
        Some(NodeRef::Expression(e)) => e.surface_text.clone(),
        None => edge.dst.to_string(),
    };
    let mut matched_rules = Vec::new();
    let mut with_rules = |base: String, perspective: Perspective| {
        let (ids, lines) = rule_sentences(ctx, &parts, perspective, &label);
        matched_rules.extend(ids);
        lines.into_iter().fold(base, |acc, l| format!("{acc} {l}"))
    };
    let linguistic = with_rules(linguistic(&parts, top), Perspective::Linguistic);
    let cultural = with_rules(cultural(&parts), Perspective::Cultural);
    let clinical = with_rules(clinical(ctx, &parts), Perspective::Clinical);
    matched_rules.sort();

    let contrast =
        match edge.alternatives.iter().max_by(|a, b| a.score.total_cmp(&b.score).then_with(|| b.dst.cmp(&a.dst))) {
            Some(alt) => {
                let me = CandidateEdge {
                    src: edge.src.clone(),
                    dst: edge.dst.clone(),
                    edge_type: edge.edge_type,
                    score: edge.model_confidence,
                    rationale: edge.rationale.clone(),
                    proposer_id: edge.proposer_id.clone().unwrap_or_default(),
                };
                let other = CandidateEdge { dst: alt.dst.clone(), score: alt.score, ..me.clone() };
                Some(if me.score >= other.score {
                    contrastive(ctx.graph, &me, &other)?
                } else {
                    contrastive(ctx.graph, &other, &me)?
                })
            }
            None => None,
        };

    let mut provenance_refs =
        vec![format!("source:{}:{}", expr.provenance.source_kind.as_str(), expr.provenance.source_id)];
    if let Some(p) = &edge.proposer_id {
        provenance_refs.push(format!("proposer:{p}"));
    }
    if let Some(r) = &edge.revision_of {
        provenance_refs.push(format!("revision_of:{r}"));
    }
    if let Some(g) = &edge.parallel_group {
        provenance_refs.push(format!("parallel_group:{g}"));
    }

    Ok(ExplanationBundle {
        edge_id: edge.id.clone(),
        version,
        linguistic,
        cultural,
        clinical,
        token_contributions: tokens,
        matched_rules,
        nearest_examples: nearest_validated_examples(ctx, edge, ctx.nearest_k)?,
        contrastive: contrast,
        confidence: edge.effective_confidence(),
        provenance_refs,
        incomplete,
    })
}
