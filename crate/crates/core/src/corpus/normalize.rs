//! Triple field normalization: NFC, trim, whitespace collapse, optional case fold.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::Triple;

/// Controls surface-form matching. Case folding is on for English-style
/// corpora and off for Chinese (where it is a no-op anyway).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationPolicy {
    pub case_fold: bool,
}

impl NormalizationPolicy {
    pub const EXACT: NormalizationPolicy = NormalizationPolicy { case_fold: false };
    pub const CASE_FOLD: NormalizationPolicy = NormalizationPolicy { case_fold: true };
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        NormalizationPolicy::EXACT
    }
}

/// NFC-normalize, trim, and collapse internal whitespace runs to one space.
pub fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    let mut out = String::with_capacity(nfc.len());
    let mut in_space = true; // leading whitespace is dropped
    for ch in nfc.chars() {
        if ch.is_whitespace() {
            if !in_space {
                out.push(' ');
                in_space = true;
            }
        } else {
            out.push(ch);
            in_space = false;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Normalize an entity surface for matching: [`normalize_text`] plus the
/// policy's case fold. Memory keys and mention keys both go through this.
pub fn normalize_surface(text: &str, policy: NormalizationPolicy) -> String {
    fold(text, policy.case_fold)
}

fn fold(text: &str, case_fold: bool) -> String {
    let normalized = normalize_text(text);
    if case_fold {
        normalized.to_lowercase()
    } else {
        normalized
    }
}

/// Normalize all three fields. Case folding applies to head and tail only;
/// relation names come from the schema and keep their casing.
pub fn normalize_triple(triple: &Triple, policy: NormalizationPolicy) -> Triple {
    Triple {
        head: fold(&triple.head, policy.case_fold),
        relation: normalize_text(&triple.relation),
        tail: fold(&triple.tail, policy.case_fold),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trims_and_collapses_whitespace() {
        let t = Triple::new("  Mo Yan", "award", "Nobel  Prize ");
        let n = normalize_triple(&t, NormalizationPolicy::EXACT);
        assert_eq!(n, Triple::new("Mo Yan", "award", "Nobel Prize"));
    }

    #[test]
    fn case_fold_touches_head_and_tail_only() {
        let t = Triple::new("ABC", "R", "X");
        let n = normalize_triple(&t, NormalizationPolicy::CASE_FOLD);
        assert_eq!(n, Triple::new("abc", "R", "x"));
    }

    #[test]
    fn empty_after_normalization_is_flagged() {
        let t = Triple::new("  ", "r", "x");
        let n = normalize_triple(&t, NormalizationPolicy::EXACT);
        assert!(n.has_empty_field());
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(h in ".{0,40}", r in ".{0,40}", t in ".{0,40}") {
            for policy in [NormalizationPolicy::EXACT, NormalizationPolicy::CASE_FOLD] {
                let once = normalize_triple(&Triple::new(h.clone(), r.clone(), t.clone()), policy);
                let twice = normalize_triple(&once, policy);
                prop_assert_eq!(once, twice);
            }
        }
    }
}
