use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::graph::Provenance;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticCategory {
    Emotion,
    SomaticComplaint,
    Behavior,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CulturalMarker {
    Idiomatic,
    Metaphorical,
    BeliefSystemReference,
    CodeMixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Mild,
    Severe,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Temporal {
    Acute,
    Chronic,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub semantic_category: SemanticCategory,
    #[serde(default)]
    pub cultural_markers: BTreeSet<CulturalMarker>,
    pub severity: Severity,
    pub temporal: Temporal,
    pub annotator_confidence: f64,
    pub annotator_id: String,
}

impl AnnotationRecord {
    /// Labels attached to provisional nodes before any annotator has seen them.
    pub fn placeholder(annotator_id: impl Into<String>) -> Self {
        Self {
            semantic_category: SemanticCategory::Other,
            cultural_markers: BTreeSet::new(),
            severity: Severity::Unknown,
            temporal: Temporal::Unknown,
            annotator_confidence: 0.0,
            annotator_id: annotator_id.into(),
        }
    }

    /// At least one label carries information (`other` and `unknown` do not).
    pub fn is_informative(&self) -> bool {
        self.semantic_category != SemanticCategory::Other
            || !self.cultural_markers.is_empty()
            || self.severity != Severity::Unknown
            || self.temporal != Temporal::Unknown
    }

    /// Schema violations. Provisional nodes may carry uninformative labels.
    pub fn issues(&self, provisional: bool) -> Vec<String> {
        let mut out = Vec::new();
        let c = self.annotator_confidence;
        if !(c.is_finite() && (0.0..=1.0).contains(&c)) {
            out.push(format!("annotator_confidence {c} outside [0,1]"));
        }
        if !provisional && !self.is_informative() {
            out.push("annotation sets no label besides annotator_id".to_owned());
        }
        if self.annotator_id.trim().is_empty() {
            out.push("annotator_id is empty".to_owned());
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub annotation: AnnotationRecord,
}

/// One line of the JSON Lines corpus format. Offsets are Unicode scalar offsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub raw_text: String,
    pub spans: Vec<Span>,
    pub language: String,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gloss: Option<String>,
}

impl CorpusRecord {
    pub fn span_text(&self, span: &Span) -> String {
        self.raw_text.chars().skip(span.start).take(span.end.saturating_sub(span.start)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordIssue {
    /// Field path, e.g. `spans[1].end`.
    pub path: String,
    pub message: String,
}

/// All violations in `record`; an empty list means it is valid.
pub fn validate_record(record: &CorpusRecord) -> Vec<RecordIssue> {
    let mut out = Vec::new();
    let mut push = |path: String, message: String| out.push(RecordIssue { path, message });
    let len = record.raw_text.chars().count();
    if record.raw_text.trim().is_empty() {
        push("raw_text".into(), "text is empty".into());
    }
    if record.language.trim().is_empty() {
        push("language".into(), "language tag is empty".into());
    }
    if let Err(e) = record.provenance.check_policy() {
        push("provenance.anonymized".into(), e.to_string());
    }
    let mut seen = HashSet::new();
    for (i, span) in record.spans.iter().enumerate() {
        if span.start >= span.end || span.end > len {
            push(
                format!("spans[{i}]"),
                format!("span [{}, {}) out of bounds for text of length {len}", span.start, span.end),
            );
        } else if record.span_text(span).trim().is_empty() {
            push(format!("spans[{i}]"), "span covers only whitespace".into());
        }
        for issue in span.annotation.issues(false) {
            push(format!("spans[{i}].annotation"), issue);
        }
        if !seen.insert((span.start, span.end, span.annotation.annotator_id.as_str())) {
            push(
                format!("spans[{i}]"),
                format!("duplicate span [{}, {}) for annotator {}", span.start, span.end, span.annotation.annotator_id),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SourceKind;
    use chrono::{TimeZone, Utc};

    fn annotation() -> AnnotationRecord {
        AnnotationRecord {
            semantic_category: SemanticCategory::Emotion,
            cultural_markers: [CulturalMarker::CodeMixed].into(),
            severity: Severity::Mild,
            temporal: Temporal::Acute,
            annotator_confidence: 0.8,
            annotator_id: "ann-1".into(),
        }
    }

    fn record(text: &str, spans: Vec<Span>) -> CorpusRecord {
        CorpusRecord {
            raw_text: text.into(),
            spans,
            language: "hi".into(),
            provenance: Provenance {
                source_kind: SourceKind::Helpline,
                source_id: "hl-1".into(),
                collected_at: Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(),
                anonymized: true,
            },
            gloss: None,
        }
    }

    #[test]
    fn code_mixed_record_is_valid() {
        let text = "mujhe stress mehsoos ho raha hai";
        let r = record(text, vec![Span { start: 0, end: text.chars().count(), annotation: annotation() }]);
        assert!(validate_record(&r).is_empty());
    }

    #[test]
    fn span_past_end_is_named() {
        let r = record("man ka bhoj", vec![Span { start: 0, end: 40, annotation: annotation() }]);
        let issues = validate_record(&r);
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].path, "spans[0]");
    }

    #[test]
    fn confidence_out_of_range() {
        let mut a = annotation();
        a.annotator_confidence = 1.2;
        let r = record("man ka bhoj", vec![Span { start: 0, end: 4, annotation: a }]);
        let issues = validate_record(&r);
        assert!(issues.iter().any(|i| i.message.contains("1.2")));
    }

    #[test]
    fn reports_every_violation() {
        let mut a = annotation();
        a.annotator_confidence = -0.1;
        let mut r = record(
            "abc",
            vec![
                Span { start: 2, end: 1, annotation: annotation() },
                Span { start: 0, end: 3, annotation: a },
                Span { start: 0, end: 3, annotation: annotation() },
            ],
        );
        r.provenance.anonymized = false;
        let paths: Vec<_> = validate_record(&r).into_iter().map(|i| i.path).collect();
        // spans[2] repeats spans[1] for the same annotator.
        assert_eq!(paths, vec!["provenance.anonymized", "spans[0]", "spans[1].annotation", "spans[2]"]);
    }

    #[test]
    fn uninformative_annotation_rejected_unless_provisional() {
        let p = AnnotationRecord::placeholder("system");
        assert!(!p.issues(false).is_empty());
        assert!(p.issues(true).is_empty());
    }

    #[test]
    fn offsets_count_scalar_values() {
        let text = "मन का बोझ";
        let r = record(text, vec![Span { start: 6, end: 9, annotation: annotation() }]);
        assert!(validate_record(&r).is_empty());
        assert_eq!(r.span_text(&r.spans[0]), "बोझ");
    }
}
