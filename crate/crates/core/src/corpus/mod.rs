//! Sentences, relation triples, schemata, scoring, and subsampling.
//!
//! The unit of extraction is a [`Triple`]; the unit of the corpus is a
//! [`Sample`] (a sentence with its gold triples). All types are immutable
//! after load and safe to share across readers.

mod load;
mod normalize;
mod score;
mod subsample;

pub use load::{
    load_dataset, load_schema_sidecar, write_generic_jsonl, write_schema_sidecar, DatasetFormat,
    LoadMode, LoadOptions, Loaded,
};
pub use normalize::{normalize_surface, normalize_text, normalize_triple, NormalizationPolicy};
pub use score::score;
pub use subsample::sample_subset;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One admissible relation type with its argument categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationType {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub head_type: String,
    pub tail_type: String,
    #[serde(default)]
    pub guideline_refs: Vec<String>,
}

impl RelationType {
    /// A relation type inferred from data, with unspecified argument categories.
    pub fn inferred(name: impl Into<String>) -> Self {
        RelationType {
            name: name.into(),
            description: String::new(),
            head_type: "unspecified".to_string(),
            tail_type: "unspecified".to_string(),
            guideline_refs: Vec::new(),
        }
    }
}

/// Ordered, duplicate-free relation vocabulary for one dataset.
///
/// The stored order is stable across loads and defines the tie-break order
/// used by candidate-relation ranking.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub dataset_id: String,
    relation_types: Vec<RelationType>,
}

impl Schema {
    pub fn new(dataset_id: impl Into<String>, relation_types: Vec<RelationType>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for rt in &relation_types {
            if rt.name.is_empty() {
                return Err(Error::Schema("relation type with empty name".into()));
            }
            if rt.head_type.is_empty() || rt.tail_type.is_empty() {
                return Err(Error::Schema(format!(
                    "relation '{}' has empty head/tail type",
                    rt.name
                )));
            }
            if !seen.insert(rt.name.clone()) {
                return Err(Error::Schema(format!("duplicate relation name '{}'", rt.name)));
            }
        }
        Ok(Schema {
            dataset_id: dataset_id.into(),
            relation_types,
        })
    }

    pub fn empty(dataset_id: impl Into<String>) -> Self {
        Schema {
            dataset_id: dataset_id.into(),
            relation_types: Vec::new(),
        }
    }

    pub fn relation_types(&self) -> &[RelationType] {
        &self.relation_types
    }

    pub fn contains(&self, name: &str) -> bool {
        self.relation_types.iter().any(|rt| rt.name == name)
    }

    /// Position in the stored order; used as the deterministic tie-break.
    pub fn position(&self, name: &str) -> Option<usize> {
        self.relation_types.iter().position(|rt| rt.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.relation_types.iter().map(|rt| rt.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.relation_types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relation_types.is_empty()
    }

    /// Append an inferred relation type if the name is not present yet.
    pub fn extend_inferred(&mut self, name: &str) {
        if !self.contains(name) {
            self.relation_types.push(RelationType::inferred(name));
        }
    }
}

/// A (head, relation, tail) extraction.
///
/// Serialized as `{"h": ..., "r": ..., "t": ...}`, the wire form used by
/// dataset files and model output parsing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    #[serde(rename = "h")]
    pub head: String,
    #[serde(rename = "r")]
    pub relation: String,
    #[serde(rename = "t")]
    pub tail: String,
}

impl Triple {
    pub fn new(
        head: impl Into<String>,
        relation: impl Into<String>,
        tail: impl Into<String>,
    ) -> Self {
        Triple {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
        }
    }

    /// True if any field is empty; such triples are rejected by parsers.
    pub fn has_empty_field(&self) -> bool {
        self.head.is_empty() || self.relation.is_empty() || self.tail.is_empty()
    }
}

impl std::fmt::Display for Triple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.relation, self.tail)
    }
}

/// A sentence paired with its gold triples. `id` is the zero-based record
/// position in the source file and is stable across loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: u64,
    pub text: String,
    #[serde(default)]
    pub gold: Vec<Triple>,
}

impl Sample {
    pub fn new(id: u64, text: impl Into<String>, gold: Vec<Triple>) -> Self {
        Sample {
            id,
            text: text.into(),
            gold,
        }
    }
}

/// Micro-averaged precision/recall/F1 with the raw counts behind them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Metrics {
    /// Zero-denominator convention: P, R, and F1 are 0 when undefined.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Metrics {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }

    pub fn zero() -> Self {
        Metrics::from_counts(0, 0, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_rejects_duplicate_names() {
        let err = Schema::new(
            "d",
            vec![RelationType::inferred("award"), RelationType::inferred("award")],
        );
        assert!(err.is_err());
    }

    #[test]
    fn schema_position_follows_insertion_order() {
        let schema = Schema::new(
            "d",
            vec![RelationType::inferred("a"), RelationType::inferred("b")],
        )
        .unwrap();
        assert_eq!(schema.position("b"), Some(1));
        assert_eq!(schema.position("missing"), None);
    }

    #[test]
    fn metrics_zero_denominators_are_zero() {
        let m = Metrics::from_counts(0, 0, 0);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn metrics_hand_case() {
        // predicted {A,B} vs gold {A,C}: tp=1 fp=1 fn=1
        let m = Metrics::from_counts(1, 1, 1);
        assert_eq!((m.precision, m.recall, m.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn triple_wire_form_uses_short_keys() {
        let t = Triple::new("Mo Yan", "award", "Nobel Prize");
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, r#"{"h":"Mo Yan","r":"award","t":"Nobel Prize"}"#);
    }
}
