//! Deterministic scripted backend: an ordered rule list mapping prompts to
//! canned responses. A run with no matching rule is a hard error, never a
//! silent fallback.

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// How a rule decides whether it applies to a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Matcher {
    /// SHA-256 hex digest of the full prompt.
    ExactHash { value: String },
    /// Prompt contains the value. An empty value matches everything.
    Substring { value: String },
    /// Applies to the n-th completion call (1-based) regardless of content.
    Position { value: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedRule {
    pub matcher: Matcher,
    pub response: String,
}

/// Rules are evaluated in order; the first match wins.
pub struct ScriptedBackend {
    rules: Vec<ScriptedRule>,
    calls: Mutex<u64>,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptedRule>) -> Self {
        ScriptedBackend {
            rules,
            calls: Mutex::new(0),
        }
    }

    /// Load rules from a JSONL file, one rule per line.
    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut rules = Vec::new();
        for (lineno, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rule: ScriptedRule = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                path: path.display().to_string(),
                line: lineno + 1,
                detail: e.to_string(),
            })?;
            rules.push(rule);
        }
        Ok(ScriptedBackend::new(rules))
    }

    pub fn has_position_rules(&self) -> bool {
        self.rules
            .iter()
            .any(|r| matches!(r.matcher, Matcher::Position { .. }))
    }

    pub fn complete(&self, prompt: &str) -> Result<String> {
        let call = {
            let mut calls = self.calls.lock().expect("call counter poisoned");
            *calls += 1;
            *calls
        };
        let hash = prompt_hash(prompt);
        for rule in &self.rules {
            let hit = match &rule.matcher {
                Matcher::ExactHash { value } => *value == hash,
                Matcher::Substring { value } => prompt.contains(value.as_str()),
                Matcher::Position { value } => *value == call,
            };
            if hit {
                return Ok(rule.response.clone());
            }
        }
        Err(Error::ScriptMiss {
            call,
            excerpt: excerpt(prompt),
        })
    }
}

/// SHA-256 hex digest used by exact-hash matchers.
pub fn prompt_hash(prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    format!("{:x}", hasher.finalize())
}

fn excerpt(prompt: &str) -> String {
    const LIMIT: usize = 240;
    if prompt.chars().count() <= LIMIT {
        prompt.to_string()
    } else {
        let cut: String = prompt.chars().take(LIMIT).collect();
        format!("{cut}…")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn first_matching_rule_wins() {
        let backend = ScriptedBackend::new(vec![
            ScriptedRule {
                matcher: Matcher::Substring { value: "beta".into() },
                response: "B".into(),
            },
            ScriptedRule {
                matcher: Matcher::Substring { value: "".into() },
                response: "fallback".into(),
            },
        ]);
        assert_eq!(backend.complete("alpha beta").unwrap(), "B");
        assert_eq!(backend.complete("alpha").unwrap(), "fallback");
    }

    #[test]
    fn position_rule_fires_on_exact_call_number() {
        let backend = ScriptedBackend::new(vec![
            ScriptedRule {
                matcher: Matcher::Position { value: 2 },
                response: "second".into(),
            },
            ScriptedRule {
                matcher: Matcher::Substring { value: "".into() },
                response: "other".into(),
            },
        ]);
        assert_eq!(backend.complete("x").unwrap(), "other");
        assert_eq!(backend.complete("x").unwrap(), "second");
        assert_eq!(backend.complete("x").unwrap(), "other");
    }

    #[test]
    fn exact_hash_matches_whole_prompt() {
        let hash = prompt_hash("the exact prompt");
        let backend = ScriptedBackend::new(vec![ScriptedRule {
            matcher: Matcher::ExactHash { value: hash },
            response: "hit".into(),
        }]);
        assert_eq!(backend.complete("the exact prompt").unwrap(), "hit");
        assert!(backend.complete("the exact prompt!").is_err());
    }

    #[test]
    fn identical_request_sequence_gives_identical_responses() {
        let rules = vec![
            ScriptedRule {
                matcher: Matcher::Position { value: 1 },
                response: "first".into(),
            },
            ScriptedRule {
                matcher: Matcher::Substring { value: "".into() },
                response: "rest".into(),
            },
        ];
        let run = |rules: Vec<ScriptedRule>| -> Vec<String> {
            let b = ScriptedBackend::new(rules);
            (0..4).map(|_| b.complete("p").unwrap()).collect()
        };
        assert_eq!(run(rules.clone()), run(rules));
    }

    #[test]
    fn loads_rules_from_jsonl() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            r#"{{"matcher":{{"kind":"substring","value":"q"}},"response":"a"}}"#
        )
        .unwrap();
        let backend = ScriptedBackend::from_file(f.path()).unwrap();
        assert_eq!(backend.complete("a q here").unwrap(), "a");
    }
}
