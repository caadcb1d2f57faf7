//! Tokenization for the statistical retrievers.

use serde::{Deserialize, Serialize};

/// `WhitespacePunct` lowercases and splits on everything non-alphanumeric
/// (English-style text). `CharBigram` strips separators and emits
/// overlapping character bigrams, which sidesteps word segmentation for
/// Chinese.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerKind {
    #[default]
    WhitespacePunct,
    CharBigram,
}

pub fn tokenize(text: &str, kind: TokenizerKind) -> Vec<String> {
    match kind {
        TokenizerKind::WhitespacePunct => text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|s| !s.is_empty())
            .map(|s| s.to_lowercase())
            .collect(),
        TokenizerKind::CharBigram => {
            let chars: Vec<char> = text.chars().filter(|c| c.is_alphanumeric()).collect();
            match chars.len() {
                0 => Vec::new(),
                1 => vec![chars[0].to_string()],
                _ => chars.windows(2).map(|w| w.iter().collect()).collect(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whitespace_punct_lowercases_and_splits() {
        assert_eq!(
            tokenize("Mo Yan, the writer!", TokenizerKind::WhitespacePunct),
            vec!["mo", "yan", "the", "writer"]
        );
    }

    #[test]
    fn bigrams_overlap() {
        assert_eq!(tokenize("莫言演讲", TokenizerKind::CharBigram), vec!["莫言", "言演", "演讲"]);
    }

    #[test]
    fn single_char_is_its_own_token() {
        assert_eq!(tokenize("莫", TokenizerKind::CharBigram), vec!["莫"]);
    }

    #[test]
    fn punctuation_only_yields_nothing() {
        assert!(tokenize("!!! ...", TokenizerKind::WhitespacePunct).is_empty());
        assert!(tokenize("!!! ...", TokenizerKind::CharBigram).is_empty());
    }
}
