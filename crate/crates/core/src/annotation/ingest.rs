use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::schema::{validate_record, CorpusRecord};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::graph::{NewExpression, NodeStatus};
use crate::ids::NodeId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestIssue {
    /// 1-based line number in the input.
    pub line: usize,
    pub path: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: usize,
    /// Nodes created by this run; spans matching existing nodes are not listed.
    pub created: Vec<NodeId>,
    pub issues: Vec<IngestIssue>,
}

/// Reads JSON Lines corpus records and turns every span of each valid record
/// into an expression node. Invalid or unparseable lines are reported and
/// skipped; blank lines are ignored. Re-running on the same input creates
/// nothing new.
pub fn ingest_corpus(engine: &mut Engine, reader: impl BufRead) -> Result<IngestReport> {
    let mut report = IngestReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| Error::Io { records: report.accepted + report.rejected, source })?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let record: CorpusRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                report.rejected += 1;
                report.issues.push(IngestIssue { line: lineno, path: String::new(), message: e.to_string() });
                continue;
            }
        };
        let issues = validate_record(&record);
        if !issues.is_empty() {
            report.rejected += 1;
            report.issues.extend(issues.into_iter().map(|x| IngestIssue {
                line: lineno,
                path: x.path,
                message: x.message,
            }));
            continue;
        }
        let len = record.raw_text.chars().count();
        let items = record
            .spans
            .iter()
            .map(|span| NewExpression {
                surface_text: record.span_text(span),
                language: record.language.clone(),
                gloss: if span.start == 0 && span.end == len { record.gloss.clone() } else { None },
                annotation: span.annotation.clone(),
                provenance: record.provenance.clone(),
                status: NodeStatus::Active,
            })
            .collect();
        match engine.add_expressions(items) {
            Ok(added) => {
                report.accepted += 1;
                report.created.extend(added.into_iter().filter(|(_, new)| *new).map(|(id, _)| id));
            }
            Err(e) => {
                report.rejected += 1;
                report.issues.push(IngestIssue { line: lineno, path: "spans".into(), message: e.to_string() });
            }
        }
    }
    Ok(report)
}
