//! Candidate relation-type retrieval: either the schema-filtered answer of
//! an LLM call or a frequency prior over the training subset.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Sample, Schema};
use crate::error::Result;
use crate::gateway::{CompletionRequest, Gateway};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateMethod {
    Llm,
    Prior,
}

/// Schema relations ordered by gold frequency in the training subset,
/// ties broken by schema order. Covers the whole schema, so `top(l)` with
/// `l >= |schema|` is a permutation of all relations.
#[derive(Debug, Clone)]
pub struct RelationPrior {
    ordered: Vec<String>,
}

impl RelationPrior {
    pub fn from_samples(samples: &[Sample], schema: &Schema) -> Self {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for sample in samples {
            for triple in &sample.gold {
                *counts.entry(triple.relation.as_str()).or_insert(0) += 1;
            }
        }
        let mut ordered: Vec<(usize, u64, String)> = schema
            .names()
            .enumerate()
            .map(|(pos, name)| (pos, counts.get(name).copied().unwrap_or(0), name.to_string()))
            .collect();
        ordered.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        RelationPrior {
            ordered: ordered.into_iter().map(|(_, _, name)| name).collect(),
        }
    }

    pub fn top(&self, l: usize) -> Vec<String> {
        self.ordered.iter().take(l).cloned().collect()
    }
}

/// Retrieve up to `l` candidate relation names for `text`. The LLM path
/// falls back to the prior when the call fails or nothing parses, recording
/// the fallback in the journal.
pub fn retrieve_candidate_relations(
    text: &str,
    schema: &Schema,
    method: CandidateMethod,
    l: usize,
    prior: &RelationPrior,
    gateway: Option<&Gateway>,
) -> Result<Vec<String>> {
    match method {
        CandidateMethod::Prior => Ok(prior.top(l)),
        CandidateMethod::Llm => {
            let gateway = match gateway {
                Some(g) => g,
                None => return Ok(prior.top(l)),
            };
            let names: Vec<&str> = schema.names().collect();
            let prompt = format!(
                "Which relation types could hold in the sentence? Answer with names from the list, comma-separated.\nRelation types: {}\nSentence: {text}\nAnswer:",
                names.join(", ")
            );
            match gateway.complete(&CompletionRequest::new(prompt, "candidates.llm")) {
                Ok(response) => {
                    let mut picked = Vec::new();
                    for raw in response.split([',', '\n']) {
                        let name = raw.trim().trim_matches(|c: char| c == '"' || c == '.');
                        if !name.is_empty() && schema.contains(name) && !picked.iter().any(|p| p == name) {
                            picked.push(name.to_string());
                        }
                    }
                    if picked.is_empty() {
                        gateway.note("candidates.fallback", "llm answer had no schema relations; using prior");
                        return Ok(prior.top(l));
                    }
                    picked.truncate(l);
                    Ok(picked)
                }
                Err(e) => {
                    gateway.note("candidates.fallback", &format!("llm call failed ({e}); using prior"));
                    Ok(prior.top(l))
                }
            }
        }
    }
}
