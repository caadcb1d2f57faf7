//! Micro P/R/F1 over normalized triple sets.

use std::collections::BTreeSet;

use super::{normalize_triple, Metrics, NormalizationPolicy, Triple};

/// Score predicted against gold triples under exact equality of normalized
/// (head, relation, tail). Inputs are deduplicated after normalization, so
/// repeated predictions neither help nor hurt.
pub fn score(predicted: &[Triple], gold: &[Triple], policy: NormalizationPolicy) -> Metrics {
    let pred: BTreeSet<Triple> = predicted.iter().map(|t| normalize_triple(t, policy)).collect();
    let gold: BTreeSet<Triple> = gold.iter().map(|t| normalize_triple(t, policy)).collect();
    let tp = pred.intersection(&gold).count() as u64;
    let fp = pred.len() as u64 - tp;
    let fn_ = gold.len() as u64 - tp;
    Metrics::from_counts(tp, fp, fn_)
}
