use serde::{Deserialize, Serialize};

use crate::align::placeholders;
use crate::error::{Error, Result};
use crate::text::tokenize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perspective {
    Linguistic,
    Cultural,
    Clinical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplanationRule {
    pub rule_id: String,
    pub pattern: String,
    /// Language tag, or `*` for any language.
    pub language: String,
    /// Placeholders: `{text}`, `{pattern}`, `{language}`, `{label}`,
    /// `{category}`, `{severity}`, `{temporal}`.
    pub template: String,
    pub perspective: Perspective,
}

pub(crate) const RULE_PLACEHOLDERS: [&str; 7] =
    ["text", "pattern", "language", "label", "category", "severity", "temporal"];

#[derive(Clone, Debug, Default)]
pub struct RuleSet {
    rules: Vec<(ExplanationRule, Vec<String>)>,
}

impl RuleSet {
    pub fn new(rules: Vec<ExplanationRule>) -> Result<Self> {
        let mut out = Vec::with_capacity(rules.len());
        let mut ids = std::collections::BTreeSet::new();
        for r in rules {
            let toks = tokenize(&r.pattern);
            if toks.is_empty() {
                return Err(Error::Validation(format!("rule {}: pattern is empty", r.rule_id)));
            }
            if r.rule_id.trim().is_empty() || !ids.insert(r.rule_id.clone()) {
                return Err(Error::Validation(format!("rule id {:?} is empty or duplicated", r.rule_id)));
            }
            for p in placeholders(&r.template)? {
                if !RULE_PLACEHOLDERS.contains(&p.as_str()) {
                    return Err(Error::Validation(format!("rule {}: unknown placeholder {{{p}}}", r.rule_id)));
                }
            }
            out.push((r, toks));
        }
        Ok(Self { rules: out })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let rules: Vec<ExplanationRule> = serde_json::from_str(json)
            .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        Self::new(rules)
    }

    pub fn bundled() -> Self {
        Self::from_json(crate::fixtures::BUNDLED_RULES).expect("bundled rules are valid")
    }

    /// Rules whose pattern occurs as a token run in `text`, in file order.
    pub fn matching<'a>(&'a self, text: &str, language: &str) -> Vec<&'a ExplanationRule> {
        let toks = tokenize(text);
        self.rules
            .iter()
            .filter(|(r, _)| r.language == "*" || r.language == language)
            .filter(|(_, p)| toks.windows(p.len()).any(|w| w == p.as_slice()))
            .map(|(r, _)| r)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}
