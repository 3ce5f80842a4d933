//! Corpus records, span annotation, lexicon-driven extraction and
//! inter-annotator agreement.

mod agreement;
mod extract;
mod ingest;
mod schema;

pub use agreement::{agreement_report, cohen_kappa, AgreementReport, Labeling, KAPPA_TARGET};
pub use extract::{extract_expressions, ExtractedSpan};
pub use ingest::{ingest_corpus, IngestIssue, IngestReport};
pub use schema::{
    validate_record, AnnotationRecord, CorpusRecord, CulturalMarker, RecordIssue, SemanticCategory, Severity, Span,
    Temporal,
};
