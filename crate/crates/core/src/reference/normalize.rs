//! Canonical keys for names: trimmed, lowercased, diacritics folded.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Fold a raw name into its canonical key.
///
/// Returns `None` when nothing is left after trimming, in which case the
/// record should be skipped. Hyphens are kept and interior whitespace
/// collapses to single spaces, so compound names keep their token structure.
pub fn normalize_name(raw: &str) -> Option<String> {
    let folded: String = raw
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .collect();

    let mut out = String::with_capacity(folded.len());
    for token in folded.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(token);
    }
    // lowercasing can reintroduce combining marks (e.g. İ -> i̇)
    let out: String = out.nfc().filter(|c| !is_combining_mark(*c)).collect();
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

/// First token of an already normalized key, splitting on spaces and hyphens.
pub fn first_token(key: &str) -> &str {
    key.split([' ', '-']).find(|t| !t.is_empty()).unwrap_or(key)
}

/// Normalize and optionally truncate to the first token.
pub fn canonical_key(raw: &str, first_token_only: bool) -> Option<String> {
    let key = normalize_name(raw)?;
    if first_token_only {
        Some(first_token(&key).to_owned())
    } else {
        Some(key)
    }
}
