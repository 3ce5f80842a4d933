//! Layered explanations: three perspectives plus attribution, rules,
//! validated examples and contrast, rendered into auditable reports.

mod bundle;
mod generate;
mod report;
mod rules;

pub use bundle::{Contrastive, ExplanationBundle, NearestExample, TokenContribution};
pub use generate::{contrastive, generate_bundle, nearest_validated_examples, token_contributions, ExplainContext};
pub use report::{render_report, Report};
pub use rules::{ExplanationRule, Perspective, RuleSet};
