//! Resolved run configuration. The CLI deserializes this from a TOML file
//! with sections `[backend]`, `[retrieval]`, `[memory]`, `[agent]`, and
//! `[eval]`; every command shares the same shape, and all randomness flows
//! from the single `seed` field.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::DatasetFormat;
use crate::error::{Error, Result};
use crate::retrieval::{CandidateMethod, EncoderKind, EntityMethod, TokenizerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub backend: BackendConfig,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    #[serde(default)]
    pub memory: MemoryConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    /// `scripted`, `http`, or `journal`.
    pub kind: String,
    /// Rule script (JSONL) for the scripted backend.
    #[serde(default)]
    pub script: Option<PathBuf>,
    /// Recorded journal for the replay backend.
    #[serde(default)]
    pub replay: Option<PathBuf>,
    /// HTTP settings; the environment variables RELEX_BASE_URL, RELEX_MODEL,
    /// and RELEX_API_KEY override or supply these.
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalConfig {
    pub enabled: bool,
    pub encoder: EncoderKind,
    pub tokenizer: TokenizerKind,
    /// Retrieved in-context examples per query.
    pub k: usize,
    /// Candidate relation types per query.
    pub l: usize,
    pub candidate_method: CandidateMethod,
    pub entity_method: EntityMethod,
    /// Content switches: labelled samples, annotation guidelines, KG facts.
    pub use_samples: bool,
    pub use_guidelines: bool,
    pub use_kg: bool,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    /// Cap on KG triples per linked entity.
    pub kg_cap: usize,
    /// Sample vectors for the embedding encoder (JSONL of {id, vector}).
    pub vectors: Option<PathBuf>,
    /// Gazetteer + triples for the knowledge store (TSV).
    pub kg_aliases: Option<PathBuf>,
    pub kg_triples: Option<PathBuf>,
    /// Guideline snippets (JSONL of {id, relation_name, text}).
    pub guidelines: Option<PathBuf>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            enabled: true,
            encoder: EncoderKind::Bm25,
            tokenizer: TokenizerKind::WhitespacePunct,
            k: 5,
            l: 5,
            candidate_method: CandidateMethod::Prior,
            entity_method: EntityMethod::Gazetteer,
            use_samples: true,
            use_guidelines: true,
            use_kg: true,
            bm25_k1: 1.5,
            bm25_b: 0.75,
            kg_cap: 10,
            vectors: None,
            kg_aliases: None,
            kg_triples: None,
            guidelines: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryMode {
    /// No reads, no writes.
    Off,
    /// Correct/wrong stores only.
    Shallow,
    /// Shallow plus entity summaries and reflections.
    Deep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifierMode {
    /// Verdict = membership of the normalized triple in the gold set.
    Oracle,
    /// Every extracted triple is written as provisional correct; the wrong
    /// store and reflections stay empty.
    Blind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryConfig {
    pub mode: MemoryMode,
    pub verifier: VerifierMode,
    /// Per-store cap on query results.
    pub k_each: usize,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            mode: MemoryMode::Off,
            verifier: VerifierMode::Oracle,
            k_each: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    /// `rule`, `llm`, or a fixed kind: `direct`, `staged`, `cot`, `react`.
    pub strategy: String,
    pub max_rounds: usize,
    /// Sentence-length bound for the direct strategy (tokens for
    /// whitespace tokenization, characters for bigrams).
    pub short_len: usize,
    /// Mentions required before the rule strategy picks the tool loop.
    pub min_mentions: usize,
    /// Per-step observation truncation, in characters.
    pub obs_limit: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            strategy: "rule".into(),
            max_rounds: 6,
            short_len: 30,
            min_mentions: 2,
            obs_limit: 1500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Training corpus backing retrieval and memory streams.
    pub train: PathBuf,
    /// Evaluation sentences.
    pub eval: PathBuf,
    pub format: DatasetFormat,
    #[serde(default)]
    pub schema: Option<PathBuf>,
    /// Case-fold surfaces when matching (English-style corpora).
    #[serde(default)]
    pub case_fold: bool,
    /// Keep an evaluation sentence out of its own retrieval context.
    #[serde(default = "default_true")]
    pub exclude_self: bool,
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        match self.backend.kind.as_str() {
            "scripted" => {
                if self.backend.script.is_none() {
                    return Err(Error::Config("backend.kind = 'scripted' requires backend.script".into()));
                }
            }
            "journal" => {
                if self.backend.replay.is_none() {
                    return Err(Error::Config("backend.kind = 'journal' requires backend.replay".into()));
                }
            }
            "http" => {}
            other => return Err(Error::Config(format!("unknown backend kind '{other}'"))),
        }
        if self.retrieval.enabled
            && self.retrieval.encoder == EncoderKind::Embedding
            && self.retrieval.vectors.is_none()
        {
            return Err(Error::Config("embedding encoder requires retrieval.vectors".into()));
        }
        if self.retrieval.kg_aliases.is_some() != self.retrieval.kg_triples.is_some() {
            return Err(Error::Config("kg_aliases and kg_triples must be given together".into()));
        }
        if self.agent.max_rounds == 0 {
            return Err(Error::Config("agent.max_rounds must be at least 1".into()));
        }
        if self.retrieval.l == 0 {
            return Err(Error::Config("retrieval.l must be at least 1".into()));
        }
        match self.agent.strategy.as_str() {
            "rule" | "llm" | "direct" | "staged" | "cot" | "react" => Ok(()),
            other => Err(Error::Config(format!("unknown strategy mode '{other}'"))),
        }
    }

    /// Content digest of the resolved configuration; equal digests imply
    /// byte-identical run outputs against the scripted backend.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        format!("{:x}", hasher.finalize())
    }
}
