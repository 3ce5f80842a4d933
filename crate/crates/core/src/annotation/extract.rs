use serde::{Deserialize, Serialize};

use crate::text::{token_spans, tokenize};

/// A lexicon phrase found in raw text, in Unicode scalar offsets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedSpan {
    pub start: usize,
    pub end: usize,
    pub phrase: String,
}

/// Leftmost-longest, non-overlapping lexicon matches on whole-token boundaries.
///
/// Matching is case-insensitive and ignores punctuation between tokens. Blank
/// lexicon entries never match. Ties in length go to the earlier lexicon entry.
pub fn extract_expressions(raw_text: &str, lexicon: &[String]) -> Vec<ExtractedSpan> {
    let patterns: Vec<(Vec<String>, &String)> =
        lexicon.iter().map(|p| (tokenize(p), p)).filter(|(toks, _)| !toks.is_empty()).collect();
    let tokens = token_spans(raw_text);
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut best: Option<(usize, &String)> = None;
        for (toks, phrase) in &patterns {
            let n = toks.len();
            if i + n > tokens.len() || best.is_some_and(|(m, _)| m >= n) {
                continue;
            }
            if tokens[i..i + n].iter().zip(toks).all(|((_, _, t), p)| t == p) {
                best = Some((n, phrase));
            }
        }
        match best {
            Some((n, phrase)) => {
                out.push(ExtractedSpan { start: tokens[i].0, end: tokens[i + n - 1].1, phrase: phrase.clone() });
                i += n;
            }
            None => i += 1,
        }
    }
    out
}
