//! Annotation guideline snippets, retrievable by relation name.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Schema;
use crate::error::{Error, Result};

/// Snippets tagged with this relation name apply to every query.
pub const GENERAL_RELATION: &str = "general";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidelineSnippet {
    pub id: String,
    pub relation_name: String,
    pub text: String,
}

/// JSONL of `{"id", "relation_name", "text"}`. When a schema is given,
/// snippets must name a schema relation or `general`.
pub fn load_guidelines(path: &Path, schema: Option<&Schema>) -> Result<Vec<GuidelineSnippet>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut snippets = Vec::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let snippet: GuidelineSnippet = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            path: path.display().to_string(),
            line: lineno + 1,
            detail: e.to_string(),
        })?;
        if let Some(schema) = schema {
            if snippet.relation_name != GENERAL_RELATION && !schema.contains(&snippet.relation_name) {
                return Err(Error::MalformedRecord {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    detail: format!("guideline names unknown relation '{}'", snippet.relation_name),
                });
            }
        }
        snippets.push(snippet);
    }
    Ok(snippets)
}

/// Snippets whose relation is in `relation_names` plus all `general`
/// snippets, in store order.
pub fn retrieve_guidelines<'a>(
    relation_names: &[String],
    store: &'a [GuidelineSnippet],
) -> Vec<&'a GuidelineSnippet> {
    store
        .iter()
        .filter(|s| s.relation_name == GENERAL_RELATION || relation_names.contains(&s.relation_name))
        .collect()
}
