//! Extraction memory: verified-correct/wrong stores, entity-keyed running
//! summaries with retrieve-update-replace semantics, reflections on wrong
//! extractions, and snapshot persistence.
//!
//! All mutation funnels through a single owner; queries are read-only. The
//! matching here is purely lexical — no vector store.

mod snapshot;

pub use snapshot::{restore, snapshot, SNAPSHOT_VERSION};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_text, normalize_triple, NormalizationPolicy, Triple};
use crate::error::Result;
use crate::gateway::{CompletionRequest, Gateway};
use crate::retrieval::{link_entity, tokenize, GuidelineSnippet, KgStore, TokenizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Wrong,
}

/// One verified extraction, recorded at a fixed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShallowRecord {
    pub triple: Triple,
    pub source_sentence: String,
    pub verdict: Verdict,
    pub step: u64,
}

/// Running natural-language summary for one entity key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepMemoryEntry {
    pub key: String,
    pub text: String,
    pub last_updated: u64,
    /// Canonical forms of the triples merged into this entry.
    pub provenance: Vec<String>,
}

/// A lesson learned from a wrong extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionEntry {
    pub text: String,
    pub trigger_triple: Triple,
    pub last_updated: u64,
}

/// The four stores plus the global step counter. Counts never decrease
/// within a run; deep keys are replaced, never deleted.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryState {
    pub correct: Vec<ShallowRecord>,
    pub wrong: Vec<ShallowRecord>,
    pub deep: BTreeMap<String, DeepMemoryEntry>,
    pub reflections: Vec<ReflectionEntry>,
    pub step_counter: u64,
}

/// What a memory query returns for prompt injection and the memory tool.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryBundle {
    pub deep: Vec<DeepMemoryEntry>,
    pub reflections: Vec<ReflectionEntry>,
    pub correct: Vec<ShallowRecord>,
}

impl MemoryBundle {
    pub fn is_empty(&self) -> bool {
        self.deep.is_empty() && self.reflections.is_empty() && self.correct.is_empty()
    }

    /// Deterministic text rendering for prompts and tool observations.
    pub fn render(&self) -> String {
        let mut lines = Vec::new();
        for entry in &self.deep {
            lines.push(format!("[entity {}] {}", entry.key, entry.text));
        }
        for r in &self.reflections {
            lines.push(format!("[lesson] {}", r.text));
        }
        for rec in &self.correct {
            lines.push(format!("[verified] {} — {}", rec.triple, rec.source_sentence));
        }
        lines.join("\n")
    }
}

impl MemoryState {
    pub fn new() -> Self {
        MemoryState::default()
    }

    pub fn is_empty(&self) -> bool {
        self.correct.is_empty()
            && self.wrong.is_empty()
            && self.deep.is_empty()
            && self.reflections.is_empty()
    }

    fn next_step(&mut self) -> u64 {
        self.step_counter += 1;
        self.step_counter
    }

    fn shallow_seen(&self, sentence: &str, triple: &Triple) -> bool {
        self.correct
            .iter()
            .chain(self.wrong.iter())
            .any(|r| r.source_sentence == sentence && r.triple == *triple)
    }

    /// Append verified results with set semantics on (sentence, triple)
    /// pairs; re-recording a known pair is a no-op, so a pair can never sit
    /// in both stores.
    pub fn record_shallow(
        &mut self,
        sentence: &str,
        verified: &[(Triple, Verdict)],
        policy: NormalizationPolicy,
    ) {
        for (triple, verdict) in verified {
            let normalized = normalize_triple(triple, policy);
            let sentence_n = normalize_text(sentence);
            if self.shallow_seen(&sentence_n, &normalized) {
                continue;
            }
            let record = ShallowRecord {
                triple: normalized,
                source_sentence: sentence_n,
                verdict: *verdict,
                step: self.next_step(),
            };
            match verdict {
                Verdict::Correct => self.correct.push(record),
                Verdict::Wrong => self.wrong.push(record),
            }
        }
    }

    /// Merge a correct triple into the summary under its entity key:
    /// retrieve the entry, ask the gateway to fold the new fact in, and
    /// replace it — or summarize a fresh entry when retrieval is empty.
    /// Gateway failures leave the entry unchanged and are journaled.
    pub fn update_deep(
        &mut self,
        triple: &Triple,
        kg: Option<&KgStore>,
        policy: NormalizationPolicy,
        gateway: &Gateway,
    ) -> Result<()> {
        let normalized = normalize_triple(triple, policy);
        let key = deep_key(&normalized, kg, policy);
        let existing = self.deep.get(&key).cloned();

        let prompt = match &existing {
            Some(entry) => format!(
                "Update the entity summary with the new fact. Answer with the updated summary only.\nCurrent summary: {}\nNew fact: {}\nUpdated summary:",
                entry.text, normalized
            ),
            None => format!(
                "Summarize the fact as one sentence about {}. Answer with the sentence only.\nFact: {}\nSummary:",
                key, normalized
            ),
        };

        let text = match gateway.complete(&CompletionRequest::new(prompt, "memory.update")) {
            Ok(text) => normalize_text(&text),
            Err(e) => {
                gateway.note("memory.update.failed", &format!("key '{key}': {e}"));
                return Ok(()); // entry left unchanged
            }
        };
        if text.is_empty() {
            gateway.note("memory.update.failed", &format!("key '{key}': empty summary"));
            return Ok(());
        }

        let step = self.next_step();
        let mut provenance = existing.map(|e| e.provenance.clone()).unwrap_or_default();
        provenance.push(normalized.to_string());
        // Replace semantics: exactly one entry per key.
        self.deep.insert(
            key.clone(),
            DeepMemoryEntry {
                key,
                text,
                last_updated: step,
                provenance,
            },
        );
        Ok(())
    }

    /// Derive a lesson from a wrong triple and merge it into the reflection
    /// store, deduplicating by normalized text. A duplicate lesson refreshes
    /// `last_updated` instead of adding an entry.
    pub fn reflect(
        &mut self,
        triple: &Triple,
        context: &[&GuidelineSnippet],
        policy: NormalizationPolicy,
        gateway: &Gateway,
    ) -> Result<()> {
        let normalized = normalize_triple(triple, policy);
        let guidelines = context
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        let prompt = format!(
            "Write one short lesson to avoid repeating a wrong extraction. Answer with the lesson only.\nWrong triple: {normalized}\nGuidelines:\n{guidelines}\nLesson:"
        );
        let lesson = match gateway.complete(&CompletionRequest::new(prompt, "memory.reflect")) {
            Ok(text) => normalize_text(&text),
            Err(e) => {
                gateway.note("memory.reflect.failed", &format!("triple {normalized}: {e}"));
                return Ok(()); // no write
            }
        };
        if lesson.is_empty() {
            return Ok(());
        }
        let step = self.next_step();
        if let Some(existing) = self.reflections.iter_mut().find(|r| r.text == lesson) {
            existing.last_updated = step;
            return Ok(());
        }
        self.reflections.push(ReflectionEntry {
            text: lesson,
            trigger_triple: normalized,
            last_updated: step,
        });
        Ok(())
    }

    /// Query the three readable stores for one sentence.
    ///
    /// Deep entries match when their key is in `mention_keys` (entity ids
    /// and normalized surfaces). Reflections are ranked by token overlap
    /// with the sentence; zero-overlap lessons are not returned. Correct
    /// shallow records match when their head or tail is a mention key.
    /// Tie-breaks: overlap desc, then `last_updated` desc, then key asc.
    pub fn query(
        &self,
        sentence: &str,
        mention_keys: &[String],
        k_each: usize,
        tokenizer: TokenizerKind,
    ) -> MemoryBundle {
        if k_each == 0 {
            return MemoryBundle::default();
        }
        let keys: Vec<String> = mention_keys.iter().map(|k| normalize_text(k)).collect();

        let mut deep: Vec<&DeepMemoryEntry> = self
            .deep
            .values()
            .filter(|e| keys.contains(&e.key))
            .collect();
        deep.sort_by(|a, b| b.last_updated.cmp(&a.last_updated).then(a.key.cmp(&b.key)));
        deep.truncate(k_each);

        let sentence_tokens: std::collections::BTreeSet<String> =
            tokenize(sentence, tokenizer).into_iter().collect();
        let mut reflections: Vec<(usize, &ReflectionEntry)> = self
            .reflections
            .iter()
            .map(|r| {
                let overlap = tokenize(&r.text, tokenizer)
                    .into_iter()
                    .collect::<std::collections::BTreeSet<_>>()
                    .intersection(&sentence_tokens)
                    .count();
                (overlap, r)
            })
            .filter(|(overlap, _)| *overlap > 0)
            .collect();
        reflections.sort_by(|a, b| {
            b.0.cmp(&a.0)
                .then(b.1.last_updated.cmp(&a.1.last_updated))
                .then(a.1.text.cmp(&b.1.text))
        });
        reflections.truncate(k_each);

        let mut correct: Vec<&ShallowRecord> = self
            .correct
            .iter()
            .filter(|r| keys.iter().any(|k| *k == r.triple.head || *k == r.triple.tail))
            .collect();
        correct.sort_by(|a, b| b.step.cmp(&a.step).then(a.triple.cmp(&b.triple)));
        correct.truncate(k_each);

        MemoryBundle {
            deep: deep.into_iter().cloned().collect(),
            reflections: reflections.into_iter().map(|(_, r)| r.clone()).collect(),
            correct: correct.into_iter().cloned().collect(),
        }
    }
}

/// Deep-memory key: the linked entity id of the head, else of the tail,
/// else the normalized head surface.
pub fn deep_key(normalized: &Triple, kg: Option<&KgStore>, policy: NormalizationPolicy) -> String {
    if let Some(kg) = kg {
        if let Some(id) = link_entity(&normalized.head, kg, policy) {
            return id;
        }
        if let Some(id) = link_entity(&normalized.tail, kg, policy) {
            return id;
        }
    }
    normalized.head.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{BackendHandle, Matcher, ScriptedBackend, ScriptedRule};

    fn gw(rules: Vec<ScriptedRule>) -> Gateway {
        Gateway::new(BackendHandle::Scripted(ScriptedBackend::new(rules)))
    }

    fn substring_rule(needle: &str, response: &str) -> ScriptedRule {
        ScriptedRule {
            matcher: Matcher::Substring { value: needle.into() },
            response: response.into(),
        }
    }

    const SENTENCE: &str = "The Musesum is located in Northeast Gaomi Township, Mo Yan's hometown.";

    #[test]
    fn shallow_records_split_by_verdict() {
        let mut state = MemoryState::new();
        state.record_shallow(
            SENTENCE,
            &[
                (Triple::new("Mo Yan", "place_of_birth", "Northeast Gaomi Township"), Verdict::Correct),
                (Triple::new("Musesum", "located_at", "Northeast Gaomi Township"), Verdict::Wrong),
            ],
            NormalizationPolicy::EXACT,
        );
        assert_eq!(state.correct.len(), 1);
        assert_eq!(state.wrong.len(), 1);
    }

    #[test]
    fn empty_verified_list_changes_nothing() {
        let mut state = MemoryState::new();
        state.record_shallow("s", &[], NormalizationPolicy::EXACT);
        assert!(state.is_empty());
        assert_eq!(state.step_counter, 0);
    }

    #[test]
    fn re_recording_a_pair_is_idempotent() {
        let mut state = MemoryState::new();
        let pair = [(Triple::new("a", "r", "b"), Verdict::Correct)];
        state.record_shallow("s", &pair, NormalizationPolicy::EXACT);
        state.record_shallow("s", &pair, NormalizationPolicy::EXACT);
        assert_eq!(state.correct.len(), 1);
    }

    #[test]
    fn deep_update_merges_into_existing_entry() {
        let mut state = MemoryState::new();
        let gateway = gw(vec![
            substring_rule(
                "Summarize the fact",
                "Mo Yan, a famous writer, was born on February 17, 1955. His real name is Guan Moye",
            ),
            substring_rule(
                "Update the entity summary",
                "Mo Yan, a famous writer, was born on February 17, 1955, in Northeast Gaomi Township. His real name is Guan Moye.",
            ),
        ]);
        let t1 = Triple::new("Mo Yan", "real_name", "Guan Moye");
        let t2 = Triple::new("Mo Yan", "place_of_birth", "Northeast Gaomi Township");
        state.update_deep(&t1, None, NormalizationPolicy::EXACT, &gateway).unwrap();
        assert_eq!(state.deep.len(), 1);
        state.update_deep(&t2, None, NormalizationPolicy::EXACT, &gateway).unwrap();
        assert_eq!(state.deep.len(), 1, "replace semantics: one entry per key");
        let entry = state.deep.get("Mo Yan").unwrap();
        assert!(entry.text.contains("Northeast Gaomi Township"));
        assert_eq!(entry.provenance.len(), 2);
    }

    #[test]
    fn deep_update_gateway_failure_leaves_state_unchanged() {
        let mut state = MemoryState::new();
        let gateway = gw(vec![]); // every call misses
        let t = Triple::new("a", "r", "b");
        state.update_deep(&t, None, NormalizationPolicy::EXACT, &gateway).unwrap();
        assert!(state.deep.is_empty());
    }

    #[test]
    fn reflection_deduplicates_identical_lessons() {
        let mut state = MemoryState::new();
        let gateway = gw(vec![substring_rule(
            "Write one short lesson",
            "Incomplete entities, such as Musesum, should not be extracted according to the annotation guidelines",
        )]);
        let wrong = Triple::new("Musesum", "located_at", "Northeast Gaomi Township");
        state.reflect(&wrong, &[], NormalizationPolicy::EXACT, &gateway).unwrap();
        state.reflect(&wrong, &[], NormalizationPolicy::EXACT, &gateway).unwrap();
        assert_eq!(state.reflections.len(), 1);
    }

    #[test]
    fn reflection_is_found_by_a_later_related_sentence() {
        let mut state = MemoryState::new();
        let gateway = gw(vec![substring_rule(
            "Write one short lesson",
            "Incomplete entities, such as Musesum, should not be extracted",
        )]);
        let wrong = Triple::new("Musesum", "located_at", "Northeast Gaomi Township");
        state.reflect(&wrong, &[], NormalizationPolicy::EXACT, &gateway).unwrap();

        let later = "The Musesum, named after the most influential contemporary writer and scholar Mr. Wang Meng";
        let bundle = state.query(later, &[], 3, TokenizerKind::WhitespacePunct);
        assert_eq!(bundle.reflections.len(), 1);
        assert!(bundle.reflections[0].text.contains("Musesum"));
    }

    #[test]
    fn query_on_empty_state_is_empty() {
        let state = MemoryState::new();
        let bundle = state.query("anything", &["Mo Yan".into()], 3, TokenizerKind::WhitespacePunct);
        assert!(bundle.is_empty());
    }

    #[test]
    fn query_with_zero_cap_is_empty() {
        let mut state = MemoryState::new();
        state.record_shallow(
            "s",
            &[(Triple::new("Mo Yan", "award", "Nobel Prize"), Verdict::Correct)],
            NormalizationPolicy::EXACT,
        );
        let bundle = state.query("s", &["Mo Yan".into()], 0, TokenizerKind::WhitespacePunct);
        assert!(bundle.is_empty());
    }

    #[test]
    fn deep_entry_is_returned_for_matching_mention() {
        let mut state = MemoryState::new();
        let gateway = gw(vec![substring_rule("Summarize the fact", "Mo Yan was born in Northeast Gaomi Township.")]);
        state
            .update_deep(
                &Triple::new("Mo Yan", "place_of_birth", "Northeast Gaomi Township"),
                None,
                NormalizationPolicy::EXACT,
                &gateway,
            )
            .unwrap();
        let bundle = state.query(
            "Mo Yan delivered a speech",
            &["Mo Yan".into()],
            3,
            TokenizerKind::WhitespacePunct,
        );
        assert_eq!(bundle.deep.len(), 1);
        assert!(bundle.deep[0].text.contains("Northeast Gaomi Township"));
    }

    #[test]
    fn shallow_correct_records_sharing_a_mention_are_returned_newest_first() {
        let mut state = MemoryState::new();
        state.record_shallow(
            "s1",
            &[(Triple::new("Mo Yan", "award", "Nobel Prize"), Verdict::Correct)],
            NormalizationPolicy::EXACT,
        );
        state.record_shallow(
            "s2",
            &[(Triple::new("Mo Yan", "place_of_birth", "Northeast Gaomi Township"), Verdict::Correct)],
            NormalizationPolicy::EXACT,
        );
        state.record_shallow(
            "s3",
            &[(Triple::new("Someone Else", "award", "Other Prize"), Verdict::Correct)],
            NormalizationPolicy::EXACT,
        );
        let bundle = state.query("about Mo Yan", &["Mo Yan".into()], 2, TokenizerKind::WhitespacePunct);
        assert_eq!(bundle.correct.len(), 2);
        assert_eq!(bundle.correct[0].triple.relation, "place_of_birth", "newest first");
        assert!(bundle.correct.iter().all(|r| r.triple.head == "Mo Yan"));
    }

    #[test]
    fn deep_key_falls_back_head_then_tail_then_surface() {
        let kg = KgStore::new(
            vec![("Nobel Prize".into(), "E3".into())],
            vec![("E3".into(), ("Nobel Prize".into(), "field".into(), "Literature".into()))],
        )
        .unwrap();
        let t = Triple::new("Somebody", "award", "Nobel Prize");
        assert_eq!(deep_key(&t, Some(&kg), NormalizationPolicy::EXACT), "E3");
        let t2 = Triple::new("Somebody", "award", "Unknown Prize");
        assert_eq!(deep_key(&t2, Some(&kg), NormalizationPolicy::EXACT), "Somebody");
        assert_eq!(deep_key(&t, None, NormalizationPolicy::EXACT), "Somebody");
    }

    #[test]
    fn counts_never_decrease_and_steps_increase() {
        let mut state = MemoryState::new();
        let mut last_total = 0;
        for i in 0..20 {
            state.record_shallow(
                &format!("sentence {i}"),
                &[(Triple::new(format!("h{i}"), "r", "t"), if i % 2 == 0 { Verdict::Correct } else { Verdict::Wrong })],
                NormalizationPolicy::EXACT,
            );
            let total = state.correct.len() + state.wrong.len();
            assert!(total >= last_total);
            last_total = total;
        }
        let steps: Vec<u64> = state.correct.iter().chain(state.wrong.iter()).map(|r| r.step).collect();
        let mut sorted = steps.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), steps.len(), "steps are unique");
    }
}
