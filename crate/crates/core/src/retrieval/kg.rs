//! Local knowledge store: alias table plus per-entity triples, loaded from
//! two TSV files. Backs gazetteer entity recognition, entity linking, and
//! entity property retrieval.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_surface, NormalizationPolicy};
use crate::error::{Error, Result};
use crate::gateway::{CompletionRequest, Gateway, ParseIssue, ParseIssueKind};

pub type KgTriple = (String, String, String);

/// How entity mentions are recognized: alias matching against the knowledge
/// store, or an LLM call aligned back to the text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityMethod {
    #[default]
    Gazetteer,
    Llm,
}

/// An entity mention with its character span (char offsets, not bytes).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub surface: String,
    pub span: (usize, usize),
}

/// Alias table plus deduplicated triples per entity. Every alias must map
/// to a known entity id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KgStore {
    aliases: BTreeMap<String, String>,
    triples: BTreeMap<String, Vec<KgTriple>>,
}

impl KgStore {
    pub fn new(aliases: Vec<(String, String)>, triples: Vec<(String, KgTriple)>) -> Result<Self> {
        let mut triple_map: BTreeMap<String, Vec<KgTriple>> = BTreeMap::new();
        for (entity, triple) in triples {
            let list = triple_map.entry(entity).or_default();
            if !list.contains(&triple) {
                list.push(triple); // dedup, first-seen order
            }
        }
        let mut alias_map = BTreeMap::new();
        for (alias, entity) in aliases {
            if !triple_map.contains_key(&entity) {
                return Err(Error::KgStore(format!(
                    "alias '{alias}' maps to unknown entity id '{entity}'"
                )));
            }
            alias_map.insert(alias, entity);
        }
        Ok(KgStore {
            aliases: alias_map,
            triples: triple_map,
        })
    }

    /// `aliases.tsv`: `alias \t entity_id`; `triples.tsv`:
    /// `entity_id \t subject \t predicate \t object`.
    pub fn from_files(aliases_path: &Path, triples_path: &Path) -> Result<Self> {
        let triples_raw = std::fs::read_to_string(triples_path)
            .map_err(|e| Error::io(triples_path.display().to_string(), e))?;
        let mut triples = Vec::new();
        for (lineno, line) in triples_raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::MalformedRecord {
                    path: triples_path.display().to_string(),
                    line: lineno + 1,
                    detail: format!("expected 4 tab-separated columns, got {}", cols.len()),
                });
            }
            triples.push((
                cols[0].to_string(),
                (cols[1].to_string(), cols[2].to_string(), cols[3].to_string()),
            ));
        }

        let aliases_raw = std::fs::read_to_string(aliases_path)
            .map_err(|e| Error::io(aliases_path.display().to_string(), e))?;
        let mut aliases = Vec::new();
        for (lineno, line) in aliases_raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 2 {
                return Err(Error::MalformedRecord {
                    path: aliases_path.display().to_string(),
                    line: lineno + 1,
                    detail: format!("expected 2 tab-separated columns, got {}", cols.len()),
                });
            }
            aliases.push((cols[0].to_string(), cols[1].to_string()));
        }
        KgStore::new(aliases, triples)
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn aliases(&self) -> impl Iterator<Item = (&str, &str)> {
        self.aliases.iter().map(|(a, e)| (a.as_str(), e.as_str()))
    }

    fn entity_triples(&self, entity_id: &str) -> Option<&[KgTriple]> {
        self.triples.get(entity_id).map(|v| v.as_slice())
    }
}

/// Maximal non-overlapping alias matches, longest-match-first, left to
/// right. Matching is exact on surface characters.
pub fn recognize_entities_gazetteer(text: &str, kg: &KgStore) -> Vec<Mention> {
    let chars: Vec<char> = text.chars().collect();
    // Longest aliases first; equal lengths in alias order for determinism.
    let mut alias_chars: Vec<Vec<char>> = kg.aliases.keys().map(|a| a.chars().collect()).collect();
    alias_chars.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));

    let mut mentions = Vec::new();
    let mut pos = 0;
    while pos < chars.len() {
        let mut matched = None;
        for alias in &alias_chars {
            if alias.is_empty() || pos + alias.len() > chars.len() {
                continue;
            }
            if &chars[pos..pos + alias.len()] == alias.as_slice() {
                matched = Some(alias.len());
                break;
            }
        }
        match matched {
            Some(len) => {
                mentions.push(Mention {
                    surface: chars[pos..pos + len].iter().collect(),
                    span: (pos, pos + len),
                });
                pos += len;
            }
            None => pos += 1,
        }
    }
    mentions
}

/// Ask the gateway for a mention list and align each to its first
/// occurrence. Mentions absent from the text are dropped with an issue.
pub fn recognize_entities_llm(text: &str, gateway: &Gateway) -> Result<(Vec<Mention>, Vec<ParseIssue>)> {
    let prompt = format!(
        "List the entity mentions in the sentence, one per line, verbatim.\nSentence: {text}\nMentions:"
    );
    let response = gateway.complete(&CompletionRequest::new(prompt, "entities.llm"))?;
    let chars: Vec<char> = text.chars().collect();
    let mut mentions = Vec::new();
    let mut issues = Vec::new();
    for line in response.lines() {
        let surface = line.trim().trim_start_matches('-').trim();
        if surface.is_empty() {
            continue;
        }
        match find_chars(&chars, surface) {
            Some(start) => {
                let len = surface.chars().count();
                mentions.push(Mention {
                    surface: surface.to_string(),
                    span: (start, start + len),
                });
            }
            None => issues.push(ParseIssue {
                kind: ParseIssueKind::MalformedLine,
                detail: format!("mention '{surface}' not found in text"),
            }),
        }
    }
    Ok((mentions, issues))
}

fn find_chars(haystack: &[char], needle: &str) -> Option<usize> {
    let needle: Vec<char> = needle.chars().collect();
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    (0..=haystack.len() - needle.len()).find(|&i| haystack[i..i + needle.len()] == needle[..])
}

/// Exact alias lookup after normalization; `None` when absent.
pub fn link_entity(surface: &str, kg: &KgStore, policy: NormalizationPolicy) -> Option<String> {
    let needle = normalize_surface(surface, policy);
    if let Some(id) = kg.aliases.get(surface) {
        return Some(id.clone());
    }
    kg.aliases
        .iter()
        .find(|(alias, _)| normalize_surface(alias, policy) == needle)
        .map(|(_, id)| id.clone())
}

/// Up to `cap` stored triples for an entity, in stored order.
pub fn retrieve_entity_triples(entity_id: &str, kg: &KgStore, cap: usize) -> Result<Vec<KgTriple>> {
    let triples = kg
        .entity_triples(entity_id)
        .ok_or_else(|| Error::UnknownEntity(entity_id.to_string()))?;
    Ok(triples.iter().take(cap).cloned().collect())
}
