use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::propose::CandidateEdge;
use crate::error::{Error, Result};
use crate::graph::{ConceptNode, EdgeType, ExpressionNode, Framework};
use crate::ids::NodeId;
use crate::text::tokenize;

/// Proposes expression → concept mappings with rationales and scores.
///
/// Implementations must be deterministic for a fixed configuration and input.
pub trait MappingProposer: Send + Sync {
    fn id(&self) -> &str;

    /// Ranked candidates (score desc). `concepts` is the full inventory in id order.
    fn propose(&self, expression: &ExpressionNode, concepts: &[&ConceptNode]) -> Result<Vec<CandidateEdge>>;
}

/// One row of the lexicon file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconEntry {
    pub cue: String,
    /// Language tag, or `*` for any language.
    pub language: String,
    pub concept_code: String,
    #[serde(default)]
    pub framework: Option<Framework>,
    /// Placeholders: `{cue}`, `{label}`, `{code}`, `{framework}`, `{text}`, `{language}`.
    pub rationale_template: String,
    pub base_confidence: f64,
}

const PLACEHOLDERS: [&str; 6] = ["cue", "label", "code", "framework", "text", "language"];

/// Placeholder names in `template`, or an error for an unterminated brace.
pub(crate) fn placeholders(template: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close =
            after.find('}').ok_or_else(|| Error::Validation(format!("unterminated placeholder in {template:?}")))?;
        out.push(after[..close].to_owned());
        rest = &after[close + 1..];
    }
    Ok(out)
}

pub(crate) fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut s = template.to_owned();
    for (k, v) in values {
        s = s.replace(&format!("{{{k}}}"), v);
    }
    s
}

/// Deterministic cue-phrase proposer over a configurable lexicon.
#[derive(Clone, Debug)]
pub struct LexiconProposer {
    id: String,
    entries: Vec<(LexiconEntry, Vec<String>)>,
}

impl LexiconProposer {
    pub fn new(id: impl Into<String>, entries: Vec<LexiconEntry>) -> Result<Self> {
        let mut parsed = Vec::with_capacity(entries.len());
        for (i, e) in entries.into_iter().enumerate() {
            let toks = tokenize(&e.cue);
            if toks.is_empty() {
                return Err(Error::Validation(format!("lexicon[{i}]: cue is empty")));
            }
            if e.concept_code.trim().is_empty() {
                return Err(Error::Validation(format!("lexicon[{i}]: concept_code is empty")));
            }
            if !(0.0..=1.0).contains(&e.base_confidence) {
                return Err(Error::Validation(format!(
                    "lexicon[{i}]: base_confidence {} outside [0,1]",
                    e.base_confidence
                )));
            }
            for p in placeholders(&e.rationale_template)? {
                if !PLACEHOLDERS.contains(&p.as_str()) {
                    return Err(Error::Validation(format!("lexicon[{i}]: unknown placeholder {{{p}}}")));
                }
            }
            parsed.push((e, toks));
        }
        Ok(Self { id: id.into(), entries: parsed })
    }

    pub fn from_json(id: impl Into<String>, json: &str) -> Result<Self> {
        let entries: Vec<LexiconEntry> = serde_json::from_str(json)
            .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        Self::new(id, entries)
    }

    pub fn bundled() -> Self {
        Self::from_json("lexicon:bundled", crate::fixtures::BUNDLED_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn entries(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.iter().map(|(e, _)| e)
    }
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    haystack.windows(needle.len()).any(|w| w == needle)
}

impl MappingProposer for LexiconProposer {
    fn id(&self) -> &str {
        &self.id
    }

    fn propose(&self, expression: &ExpressionNode, concepts: &[&ConceptNode]) -> Result<Vec<CandidateEdge>> {
        let text_tokens = tokenize(&expression.surface_text);
        let mut best: BTreeMap<&NodeId, CandidateEdge> = BTreeMap::new();
        for (entry, cue) in &self.entries {
            if entry.language != "*" && entry.language != expression.language {
                continue;
            }
            if !contains_run(&text_tokens, cue) {
                continue;
            }
            let Some(concept) = concepts
                .iter()
                .find(|c| c.code == entry.concept_code && entry.framework.is_none_or(|f| f == c.framework))
            else {
                continue;
            };
            if best.get(&concept.id).is_some_and(|c| c.score >= entry.base_confidence) {
                continue;
            }
            let framework = concept.framework.to_string();
            let mut rationale = render(
                &entry.rationale_template,
                &[
                    ("cue", &entry.cue),
                    ("label", &concept.label),
                    ("code", &concept.code),
                    ("framework", &framework),
                    ("text", &expression.surface_text),
                    ("language", &expression.language),
                ],
            );
            if !rationale.contains(&entry.cue) {
                rationale.push_str(&format!(" (matched cue \"{}\")", entry.cue));
            }
            best.insert(
                &concept.id,
                CandidateEdge {
                    src: expression.id.clone(),
                    dst: concept.id.clone(),
                    edge_type: EdgeType::ExpressionConcept,
                    score: entry.base_confidence,
                    rationale,
                    proposer_id: self.id.clone(),
                },
            );
        }
        let mut out: Vec<CandidateEdge> = best.into_values().collect();
        out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.dst.cmp(&b.dst)));
        Ok(out)
    }
}
