//! Text normalization and tokenization shared by node identity, lexicon
//! matching, and the hashed embedding provider.

use unicode_normalization::UnicodeNormalization;

/// NFC, trimmed, case preserved. This is the identity form for expression text.
pub fn normalize(text: &str) -> String {
    text.nfc().collect::<String>().trim().to_owned()
}

pub fn normalize_language(tag: &str) -> String {
    tag.trim().to_lowercase()
}

fn is_separator(c: char) -> bool {
    c.is_whitespace()
        || c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{0964}'
                | '\u{0965}'
                | '\u{2018}'
                | '\u{2019}'
                | '\u{201C}'
                | '\u{201D}'
                | '\u{2026}'
                | '\u{2013}'
                | '\u{2014}'
                | '\u{00A0}'
        )
}

/// Lowercased word tokens. Combining marks stay attached to their base
/// letters, so Devanagari and Kannada words are not split on vowel signs.
pub fn tokenize(text: &str) -> Vec<String> {
    normalize(text).split(is_separator).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

/// Tokens with their Unicode scalar offsets `[start, end)` in `text`.
pub(crate) fn token_spans(text: &str) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        match (is_separator(c), start) {
            (true, Some(s)) => {
                out.push((s, i, chars[s..i].iter().collect::<String>().to_lowercase()));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, chars.len(), chars[s..].iter().collect::<String>().to_lowercase()));
    }
    out
}
