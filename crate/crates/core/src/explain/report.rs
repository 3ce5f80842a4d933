use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::bundle::ExplanationBundle;
use crate::graph::{Edge, Graph, NodeRef};
use crate::workflow::{ValidationDecision, Verdict};

/// Human-readable mapping report in plain text and HTML. Both renderings are
/// pure functions of their inputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub text: String,
    pub html: String,
}

struct Section {
    title: &'static str,
    lines: Vec<String>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "not yet available".to_owned(), |x| format!("{x:.3}"))
}

fn node_line(graph: &Graph, id: &crate::ids::NodeId) -> String {
    match graph.node(id) {
        Some(NodeRef::Expression(e)) => format!("\"{}\" [{}] ({})", e.surface_text, e.language, e.id),
        Some(NodeRef::Concept(c)) => format!("{}, {} {} ({})", c.label, c.framework, c.code, c.id),
        None => id.to_string(),
    }
}

fn sections(graph: &Graph, edge: &Edge, bundle: &ExplanationBundle, decisions: &[ValidationDecision]) -> Vec<Section> {
    let mut out = Vec::new();

    let mut expr = Vec::new();
    if let Some(e) = graph.expression(&edge.src) {
        expr.push(format!("Text: {}", e.surface_text));
        expr.push(format!("Language: {}", e.language));
        if let Some(g) = &e.gloss {
            expr.push(format!("Gloss: {g}"));
        }
        expr.push(format!("Node: {} ({:?})", e.id, e.status));
    }
    out.push(Section { title: "Expression", lines: expr });

    out.push(Section {
        title: "Mapping",
        lines: vec![
            format!("Edge: {} ({:?})", edge.id, edge.edge_type),
            format!("From: {}", node_line(graph, &edge.src)),
            format!("To: {}", node_line(graph, &edge.dst)),
            format!("Status: {:?}", edge.status),
            format!("Rationale: {}", edge.rationale),
        ],
    });

    let mut persp = vec![
        format!("Linguistic: {}", bundle.linguistic),
        format!("Cultural: {}", bundle.cultural),
        format!("Clinical: {}", bundle.clinical),
    ];
    if bundle.incomplete {
        persp.push("Note: some inputs were unavailable; this explanation is incomplete.".to_owned());
    }
    if !bundle.matched_rules.is_empty() {
        persp.push(format!("Matched rules: {}", bundle.matched_rules.join(", ")));
    }
    out.push(Section { title: "Perspectives", lines: persp });

    let accepts = decisions.iter().filter(|d| d.verdict == Verdict::Accept).count();
    let rejects = decisions.iter().filter(|d| d.verdict == Verdict::Reject).count();
    let mut conf = vec![
        format!("Model confidence: {:.3}", edge.model_confidence),
        format!(
            "Validator agreement: {} ({accepts} accept, {rejects} reject, {} decision(s))",
            fmt_opt(edge.validator_agreement),
            decisions.len()
        ),
        format!("Combined confidence: {}", fmt_opt(edge.combined_confidence)),
    ];
    for d in decisions {
        let mut line = format!("{:?} review by {}: {:?}", d.role, d.validator_id, d.verdict);
        if !d.comment.is_empty() {
            let _ = write!(line, ", comment: {}", d.comment);
        }
        conf.push(line);
    }
    if let Some(a) = &edge.adjudication {
        conf.push(format!("Adjudication ({:?}): {}", a.outcome, a.note));
    }
    out.push(Section { title: "Confidence", lines: conf });

    let tokens: Vec<String> =
        bundle.token_contributions.iter().map(|t| format!("{}: {:+.4}", t.token, t.score)).collect();
    out.push(Section {
        title: "Token influence",
        lines: if tokens.is_empty() { vec!["none computed".to_owned()] } else { tokens },
    });

    let mut prov = Vec::new();
    if let Some(e) = graph.expression(&edge.src) {
        let p = &e.provenance;
        prov.push(format!(
            "Source: {} ({}), collected {}, anonymized: {}",
            p.source_kind.describe(),
            p.source_id,
            p.collected_at.to_rfc3339(),
            p.anonymized
        ));
    }
    prov.extend(bundle.provenance_refs.iter().map(|r| format!("Ref: {r}")));
    if prov.is_empty() {
        prov.push("no provenance recorded".to_owned());
    }
    out.push(Section { title: "Provenance", lines: prov });

    let mut alts = Vec::new();
    if let Some(g) = &edge.parallel_group {
        alts.push(format!("Parallel group {g}:"));
        for other in graph.edges().filter(|e| e.parallel_group.as_ref() == Some(g)) {
            alts.push(format!(
                "- {} → {}: {}",
                other.id,
                node_line(graph, &other.dst),
                other.parallel_reason.as_deref().unwrap_or("no reason recorded")
            ));
        }
    }
    if let Some(c) = &bundle.contrastive {
        alts.push(format!("Contrast: {}", c.text));
    }
    for alt in &edge.alternatives {
        alts.push(format!("Alternative: {} (score {:.3})", node_line(graph, &alt.dst), alt.score));
    }
    for ex in &bundle.nearest_examples {
        let desc = graph
            .edge(&ex.edge_id)
            .map(|e| format!("{} → {}", node_line(graph, &e.src), node_line(graph, &e.dst)))
            .unwrap_or_default();
        alts.push(format!("Validated example {} (similarity {:.3}): {desc}", ex.edge_id, ex.similarity));
    }
    if alts.is_empty() {
        alts.push("none".to_owned());
    }
    out.push(Section { title: "Alternatives", lines: alts });
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

pub fn render_report(
    graph: &Graph,
    edge: &Edge,
    bundle: &ExplanationBundle,
    decisions: &[ValidationDecision],
) -> Report {
    let secs = sections(graph, edge, bundle, decisions);
    let mut text = format!("Mapping report for {}\n", edge.id);
    let mut html = format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head><meta charset=\"utf-8\"><title>Mapping report {}</title></head>\n<body>\n<h1>Mapping report {}</h1>\n",
        escape(edge.id.as_str()),
        escape(edge.id.as_str())
    );
    for s in &secs {
        let _ = write!(text, "\n== {} ==\n", s.title);
        let _ = write!(html, "<section>\n<h2>{}</h2>\n<ul>\n", s.title);
        for l in &s.lines {
            text.push_str(l);
            text.push('\n');
            let _ = writeln!(html, "<li>{}</li>", escape(l));
        }
        html.push_str("</ul>\n</section>\n");
    }
    html.push_str("</body>\n</html>\n");
    Report { text, html }
}
