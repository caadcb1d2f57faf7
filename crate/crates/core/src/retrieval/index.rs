//! Immutable sample indices and exhaustive top-k retrieval.
//!
//! Scoring functions, pinned here and mirrored by the test oracles:
//! - BM25 (Okapi): `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))`,
//!   `score(d) = Σ_t idf(t) · tf·(k1+1) / (tf + k1·(1 - b + b·|d|/avgdl))`,
//!   summed over query tokens with multiplicity; defaults k1=1.5, b=0.75.
//! - TF-IDF: raw term counts weighted by `ln((1+N)/(1+df)) + 1`, documents
//!   and query l2-normalized, scored by dot product (cosine).
//! - Embedding: cosine similarity against a pluggable vector source.
//! - Random: a seed-keyed permutation, i.e. sampling without replacement.
//!
//! Hits are ordered by (score desc, sample id asc) and ranks start at 1.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tokenize::{tokenize, TokenizerKind};
use super::vectors::VectorSource;
use crate::corpus::Sample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Random,
    Tfidf,
    Bm25,
    Embedding,
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(EncoderKind::Random),
            "tfidf" => Ok(EncoderKind::Tfidf),
            "bm25" => Ok(EncoderKind::Bm25),
            "embedding" => Ok(EncoderKind::Embedding),
            other => Err(Error::Config(format!("unknown encoder kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IndexConfig {
    pub kind: EncoderKind,
    pub tokenizer: TokenizerKind,
    /// Run seed; only the random encoder consumes it.
    pub seed: u64,
    pub bm25_k1: f64,
    pub bm25_b: f64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            kind: EncoderKind::Bm25,
            tokenizer: TokenizerKind::WhitespacePunct,
            seed: 0,
            bm25_k1: 1.5,
            bm25_b: 0.75,
        }
    }
}

/// One retrieved sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub sample_id: u64,
    pub score: f64,
    /// 1-based, consecutive.
    pub rank: usize,
}

/// Hits plus a flag raised when the query produced no tokens under the
/// index tokenizer (statistical encoders only).
#[derive(Debug, Clone, Default)]
pub struct RetrievalOutput {
    pub hits: Vec<RetrievalHit>,
    pub empty_query: bool,
}

enum Repr {
    Random,
    Tfidf {
        /// l2-normalized term weights per document. Sorted maps keep float
        /// accumulation order stable across processes.
        doc_vectors: Vec<BTreeMap<String, f64>>,
        df: BTreeMap<String, u64>,
    },
    Bm25 {
        doc_tfs: Vec<BTreeMap<String, u64>>,
        doc_len: Vec<u64>,
        df: BTreeMap<String, u64>,
        avgdl: f64,
    },
    Embedding {
        vectors: Vec<Vec<f64>>,
        source: Arc<dyn VectorSource>,
    },
}

/// Immutable after build; concurrent queries are safe.
pub struct SampleIndex {
    kind: EncoderKind,
    tokenizer: TokenizerKind,
    seed: u64,
    k1: f64,
    b: f64,
    sample_ids: Vec<u64>,
    repr: Repr,
}

impl std::fmt::Debug for SampleIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SampleIndex")
            .field("kind", &self.kind)
            .field("len", &self.sample_ids.len())
            .finish()
    }
}

impl SampleIndex {
    pub fn encoder_kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn sample_ids(&self) -> &[u64] {
        &self.sample_ids
    }

    /// Document frequencies (statistical encoders only); exposed for
    /// diagnostics and tests.
    pub fn document_frequency(&self, term: &str) -> Option<u64> {
        match &self.repr {
            Repr::Tfidf { df, .. } | Repr::Bm25 { df, .. } => Some(df.get(term).copied().unwrap_or(0)),
            _ => None,
        }
    }

    pub fn average_doc_len(&self) -> Option<f64> {
        match &self.repr {
            Repr::Bm25 { avgdl, .. } => Some(*avgdl),
            _ => None,
        }
    }
}

fn term_counts(tokens: &[String]) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.clone()).or_insert(0) += 1;
    }
    counts
}

/// Build an index over `samples`. Empty corpora produce a valid empty index
/// for every encoder kind; the embedding kind requires a vector source
/// covering all sample ids.
pub fn build_index(
    samples: &[Sample],
    config: &IndexConfig,
    vector_source: Option<Arc<dyn VectorSource>>,
) -> Result<SampleIndex> {
    let sample_ids: Vec<u64> = samples.iter().map(|s| s.id).collect();
    let repr = match config.kind {
        EncoderKind::Random => Repr::Random,
        EncoderKind::Tfidf => {
            let (doc_tfs, df) = corpus_stats(samples, config.tokenizer);
            let n = samples.len() as f64;
            let doc_vectors = doc_tfs
                .iter()
                .map(|tf| l2_normalize(tfidf_weights(tf, &df, n)))
                .collect();
            Repr::Tfidf { doc_vectors, df }
        }
        EncoderKind::Bm25 => {
            let (doc_tfs, df) = corpus_stats(samples, config.tokenizer);
            let doc_len: Vec<u64> = doc_tfs.iter().map(|tf| tf.values().sum()).collect();
            let avgdl = if doc_len.is_empty() {
                0.0
            } else {
                doc_len.iter().sum::<u64>() as f64 / doc_len.len() as f64
            };
            Repr::Bm25 {
                doc_tfs,
                doc_len,
                df,
                avgdl,
            }
        }
        EncoderKind::Embedding => {
            let source = vector_source
                .ok_or_else(|| Error::Config("embedding encoder requires a vector source".into()))?;
            let mut vectors = Vec::with_capacity(samples.len());
            let mut missing = Vec::new();
            let mut dim = None;
            for sample in samples {
                match source.vector_for_id(sample.id) {
                    Some(embedding) => {
                        if let Some(d) = dim {
                            if embedding.dim() != d {
                                return Err(Error::VectorSource(format!(
                                    "vector for sample {} has dim {} but index dim is {d}",
                                    sample.id,
                                    embedding.dim()
                                )));
                            }
                        } else {
                            dim = Some(embedding.dim());
                        }
                        vectors.push(embedding.values);
                    }
                    None => missing.push(sample.id),
                }
            }
            if !missing.is_empty() {
                return Err(Error::MissingVectors(missing));
            }
            Repr::Embedding { vectors, source }
        }
    };
    Ok(SampleIndex {
        kind: config.kind,
        tokenizer: config.tokenizer,
        seed: config.seed,
        k1: config.bm25_k1,
        b: config.bm25_b,
        sample_ids,
        repr,
    })
}

fn corpus_stats(
    samples: &[Sample],
    tokenizer: TokenizerKind,
) -> (Vec<BTreeMap<String, u64>>, BTreeMap<String, u64>) {
    let mut doc_tfs = Vec::with_capacity(samples.len());
    let mut df: BTreeMap<String, u64> = BTreeMap::new();
    for sample in samples {
        let counts = term_counts(&tokenize(&sample.text, tokenizer));
        for term in counts.keys() {
            *df.entry(term.clone()).or_insert(0) += 1;
        }
        doc_tfs.push(counts);
    }
    (doc_tfs, df)
}

fn idf_tfidf(df: u64, n: f64) -> f64 {
    ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0
}

fn tfidf_weights(tf: &BTreeMap<String, u64>, df: &BTreeMap<String, u64>, n: f64) -> BTreeMap<String, f64> {
    tf.iter()
        .map(|(term, &count)| {
            let d = df.get(term).copied().unwrap_or(0);
            (term.clone(), count as f64 * idf_tfidf(d, n))
        })
        .collect()
}

fn l2_normalize(mut weights: BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for w in weights.values_mut() {
            *w /= norm;
        }
    }
    weights
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Retrieve the top `k` samples for `query`.
pub fn retrieve_samples(index: &SampleIndex, query: &str, k: usize) -> Result<RetrievalOutput> {
    retrieve_samples_excluding(index, query, k, &BTreeSet::new())
}

/// As [`retrieve_samples`], but never returns samples whose id is in
/// `exclude` (used to keep an evaluation sentence out of its own context).
pub fn retrieve_samples_excluding(
    index: &SampleIndex,
    query: &str,
    k: usize,
    exclude: &BTreeSet<u64>,
) -> Result<RetrievalOutput> {
    if k == 0 || index.is_empty() {
        return Ok(RetrievalOutput::default());
    }
    let candidates: Vec<usize> = (0..index.sample_ids.len())
        .filter(|&i| !exclude.contains(&index.sample_ids[i]))
        .collect();
    if candidates.is_empty() {
        return Ok(RetrievalOutput::default());
    }

    let mut empty_query = false;
    let mut scored: Vec<(u64, f64)> = match &index.repr {
        Repr::Random => {
            // A query-keyed permutation: deterministic for (seed, query) and
            // uniform without replacement. Synthetic scores decrease with
            // position so the (score desc, id asc) contract still holds.
            let mut rng = ChaCha8Rng::seed_from_u64(index.seed ^ stable_hash(query));
            let mut order = candidates.clone();
            order.shuffle(&mut rng);
            let n = order.len() as f64;
            order
                .iter()
                .enumerate()
                .map(|(pos, &i)| (index.sample_ids[i], (n - pos as f64) / n))
                .collect()
        }
        Repr::Tfidf { doc_vectors, df } => {
            let tokens = tokenize(query, index.tokenizer);
            if tokens.is_empty() {
                empty_query = true;
                Vec::new()
            } else {
                let n = index.sample_ids.len() as f64;
                // Query vector over in-vocabulary terms only.
                let qtf: BTreeMap<String, u64> = term_counts(&tokens)
                    .into_iter()
                    .filter(|(term, _)| df.contains_key(term))
                    .collect();
                let qvec = l2_normalize(tfidf_weights(&qtf, df, n));
                candidates
                    .iter()
                    .map(|&i| {
                        let dot: f64 = qvec
                            .iter()
                            .filter_map(|(term, qw)| doc_vectors[i].get(term).map(|dw| qw * dw))
                            .sum();
                        (index.sample_ids[i], dot)
                    })
                    .collect()
            }
        }
        Repr::Bm25 {
            doc_tfs,
            doc_len,
            df,
            avgdl,
        } => {
            let tokens = tokenize(query, index.tokenizer);
            if tokens.is_empty() {
                empty_query = true;
                Vec::new()
            } else {
                let n = index.sample_ids.len() as f64;
                candidates
                    .iter()
                    .map(|&i| {
                        let mut score = 0.0;
                        for term in &tokens {
                            let tf = doc_tfs[i].get(term).copied().unwrap_or(0) as f64;
                            if tf == 0.0 {
                                continue;
                            }
                            let d = df.get(term).copied().unwrap_or(0) as f64;
                            let idf = (1.0 + (n - d + 0.5) / (d + 0.5)).ln();
                            let denom = tf + index.k1 * (1.0 - index.b + index.b * doc_len[i] as f64 / avgdl);
                            score += idf * tf * (index.k1 + 1.0) / denom;
                        }
                        (index.sample_ids[i], score)
                    })
                    .collect()
            }
        }
        Repr::Embedding { vectors, source } => {
            let query_vec = source.embed_text(query)?;
            candidates
                .iter()
                .map(|&i| (index.sample_ids[i], cosine(&query_vec.values, &vectors[i])))
                .collect()
        }
    };

    if empty_query {
        log::warn!("query produced no tokens under the index tokenizer; returning no hits");
        return Ok(RetrievalOutput {
            hits: Vec::new(),
            empty_query: true,
        });
    }

    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let hits = scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (sample_id, score))| RetrievalHit {
            sample_id,
            score,
            rank: i + 1,
        })
        .collect();
    Ok(RetrievalOutput {
        hits,
        empty_query: false,
    })
}

/// First 8 bytes of SHA-256; stable across runs and platforms.
pub(crate) fn stable_hash(text: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(text.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::StaticVectorSource;

    fn sample(id: u64, text: &str) -> Sample {
        Sample::new(id, text, vec![])
    }

    fn config(kind: EncoderKind) -> IndexConfig {
        IndexConfig {
            kind,
            ..IndexConfig::default()
        }
    }

    #[test]
    fn empty_corpus_is_valid_for_every_kind() {
        for kind in [EncoderKind::Random, EncoderKind::Tfidf, EncoderKind::Bm25] {
            let index = build_index(&[], &config(kind), None).unwrap();
            let out = retrieve_samples(&index, "anything", 5).unwrap();
            assert!(out.hits.is_empty());
        }
        let source: Arc<dyn VectorSource> = Arc::new(StaticVectorSource::new());
        let index = build_index(&[], &config(EncoderKind::Embedding), Some(source)).unwrap();
        assert!(index.is_empty());
    }

    #[test]
    fn document_frequencies_match_hand_count() {
        let docs = vec![sample(0, "a"), sample(1, "b"), sample(2, "a")];
        let index = build_index(&docs, &config(EncoderKind::Tfidf), None).unwrap();
        assert_eq!(index.document_frequency("a"), Some(2));
        assert_eq!(index.document_frequency("b"), Some(1));
    }

    #[test]
    fn bm25_average_doc_length() {
        let docs = vec![sample(0, "w x"), sample(1, "w x y z")];
        let index = build_index(&docs, &config(EncoderKind::Bm25), None).unwrap();
        assert_eq!(index.average_doc_len(), Some(3.0));
    }

    #[test]
    fn embedding_self_query_ranks_first_with_unit_score() {
        let mut source = StaticVectorSource::new();
        source.insert_id(0, vec![1.0, 2.0, 3.0]).unwrap();
        source.insert_id(1, vec![-3.0, 1.0, 0.5]).unwrap();
        source.insert_text("doc zero", vec![1.0, 2.0, 3.0]).unwrap();
        let docs = vec![sample(0, "doc zero"), sample(1, "doc one")];
        let index = build_index(
            &docs,
            &config(EncoderKind::Embedding),
            Some(Arc::new(source)),
        )
        .unwrap();
        let out = retrieve_samples(&index, "doc zero", 2).unwrap();
        assert_eq!(out.hits[0].sample_id, 0);
        assert!((out.hits[0].score - 1.0).abs() < 1e-9);
        assert_eq!(out.hits[0].rank, 1);
    }

    #[test]
    fn missing_vectors_error_lists_ids() {
        let mut source = StaticVectorSource::new();
        source.insert_id(0, vec![1.0]).unwrap();
        let docs = vec![sample(0, "a"), sample(1, "b"), sample(2, "c")];
        let err = build_index(&docs, &config(EncoderKind::Embedding), Some(Arc::new(source)));
        match err {
            Err(Error::MissingVectors(ids)) => assert_eq!(ids, vec![1, 2]),
            other => panic!("expected missing vectors, got {other:?}"),
        }
    }

    #[test]
    fn empty_token_query_returns_flagged_empty() {
        let docs = vec![sample(0, "a b c")];
        let index = build_index(&docs, &config(EncoderKind::Bm25), None).unwrap();
        let out = retrieve_samples(&index, "!!!", 3).unwrap();
        assert!(out.hits.is_empty());
        assert!(out.empty_query);
    }

    #[test]
    fn lexical_overlap_wins_over_fillers() {
        let docs = vec![
            sample(0, "When the newly minted Nobel Prize in Literature, British novelist Kazuo Ishiguro, found himself"),
            sample(1, "The weather in the mountains was clear all week"),
            sample(2, "Quarterly earnings exceeded expectations for the retailer"),
        ];
        let index = build_index(&docs, &config(EncoderKind::Bm25), None).unwrap();
        let out = retrieve_samples(&index, "Nobel laureate and writer Mo Yan delivered a speech", 3).unwrap();
        assert_eq!(out.hits[0].sample_id, 0);
        assert!(out.hits[0].score > 0.0);
    }

    #[test]
    fn exclusion_set_removes_the_query_sample() {
        let docs = vec![sample(0, "alpha beta"), sample(1, "alpha gamma")];
        let index = build_index(&docs, &config(EncoderKind::Bm25), None).unwrap();
        let exclude: BTreeSet<u64> = [0].into();
        for kind in [EncoderKind::Bm25, EncoderKind::Random] {
            let index = build_index(&docs, &config(kind), None).unwrap();
            let out = retrieve_samples_excluding(&index, "alpha beta", 5, &exclude).unwrap();
            assert!(out.hits.iter().all(|h| h.sample_id != 0), "{kind:?}");
        }
        let out = retrieve_samples_excluding(&index, "alpha beta", 5, &BTreeSet::new()).unwrap();
        assert_eq!(out.hits[0].sample_id, 0);
    }

    #[test]
    fn random_kind_is_deterministic_per_seed() {
        let docs: Vec<Sample> = (0..30).map(|i| sample(i, "x")).collect();
        let mut cfg = config(EncoderKind::Random);
        cfg.seed = 11;
        let index = build_index(&docs, &cfg, None).unwrap();
        let a = retrieve_samples(&index, "q", 5).unwrap();
        let b = retrieve_samples(&index, "q", 5).unwrap();
        assert_eq!(a.hits, b.hits);

        cfg.seed = 12;
        let other = build_index(&docs, &cfg, None).unwrap();
        let c = retrieve_samples(&other, "q", 5).unwrap();
        let ids = |o: &RetrievalOutput| o.hits.iter().map(|h| h.sample_id).collect::<Vec<_>>();
        assert_ne!(ids(&a), ids(&c));
    }

    #[test]
    fn zero_score_documents_still_fill_ranks() {
        let docs = vec![sample(0, "unrelated"), sample(1, "also unrelated")];
        let index = build_index(&docs, &config(EncoderKind::Bm25), None).unwrap();
        let out = retrieve_samples(&index, "nomatch", 2).unwrap();
        assert_eq!(out.hits.len(), 2);
        assert_eq!(out.hits[0].sample_id, 0); // ties break by id
        assert_eq!(out.hits[1].rank, 2);
    }
}
