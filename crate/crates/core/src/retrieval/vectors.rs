//! Pluggable embedding providers. Vectors always come from outside the
//! process: a precomputed file keyed by sample id (optionally by text) or an
//! HTTP embeddings endpoint.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fixed-length real vector; components must be finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::VectorSource("vector has NaN/Inf components".into()));
        }
        Ok(Embedding { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Source of embeddings for indexed samples and for query texts.
pub trait VectorSource: Send + Sync {
    fn vector_for_id(&self, id: u64) -> Option<Embedding>;
    fn embed_text(&self, text: &str) -> Result<Embedding>;
}

/// In-memory source; also the backing store for [`FileVectorSource`].
#[derive(Debug, Default, Clone)]
pub struct StaticVectorSource {
    by_id: HashMap<u64, Embedding>,
    by_text: HashMap<String, Embedding>,
}

impl StaticVectorSource {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_id(&mut self, id: u64, vector: Vec<f64>) -> Result<()> {
        self.by_id.insert(id, Embedding::new(vector)?);
        Ok(())
    }

    pub fn insert_text(&mut self, text: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        self.by_text.insert(text.into(), Embedding::new(vector)?);
        Ok(())
    }
}

impl VectorSource for StaticVectorSource {
    fn vector_for_id(&self, id: u64) -> Option<Embedding> {
        self.by_id.get(&id).cloned()
    }

    fn embed_text(&self, text: &str) -> Result<Embedding> {
        self.by_text
            .get(text)
            .cloned()
            .ok_or_else(|| Error::VectorSource(format!("no vector recorded for text: {text}")))
    }
}

#[derive(Deserialize)]
struct VectorRecord {
    #[serde(default)]
    id: Option<u64>,
    #[serde(default)]
    text: Option<String>,
    vector: Vec<f64>,
}

/// JSONL file of `{"id": ..., "vector": [...]}` records; records may carry a
/// `text` field so the same file can answer query-embedding lookups.
pub struct FileVectorSource {
    inner: StaticVectorSource,
}

impl FileVectorSource {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut inner = StaticVectorSource::new();
        for (lineno, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: VectorRecord = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                path: path.display().to_string(),
                line: lineno + 1,
                detail: e.to_string(),
            })?;
            if let Some(id) = record.id {
                inner.insert_id(id, record.vector.clone())?;
            }
            if let Some(text) = record.text {
                inner.insert_text(text, record.vector)?;
            }
        }
        Ok(FileVectorSource { inner })
    }
}

impl VectorSource for FileVectorSource {
    fn vector_for_id(&self, id: u64) -> Option<Embedding> {
        self.inner.vector_for_id(id)
    }

    fn embed_text(&self, text: &str) -> Result<Embedding> {
        self.inner.embed_text(text)
    }
}

/// OpenAI-compatible embeddings endpoint. Ids are answered from a local
/// cache populated at index build time via `embed_text`.
pub struct HttpVectorSource {
    base_url: String,
    model: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct EmbeddingsRequest<'a> {
    model: &'a str,
    input: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingsDatum>,
}

#[derive(Deserialize)]
struct EmbeddingsDatum {
    embedding: Vec<f64>,
}

impl HttpVectorSource {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(HttpVectorSource {
            base_url: base_url.into(),
            model: model.into(),
            api_key,
            client,
        })
    }
}

impl VectorSource for HttpVectorSource {
    fn vector_for_id(&self, _id: u64) -> Option<Embedding> {
        None // id-keyed vectors only exist in file sources
    }

    fn embed_text(&self, text: &str) -> Result<Embedding> {
        let url = format!("{}/embeddings", self.base_url.trim_end_matches('/'));
        let body = EmbeddingsRequest {
            model: &self.model,
            input: vec![text],
        };
        let mut builder = self.client.post(&url).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| Error::Transport(format!("POST {url}: {e}")))?;
        if !response.status().is_success() {
            return Err(Error::Transport(format!("{url} returned {}", response.status())));
        }
        let parsed: EmbeddingsResponse = response
            .json()
            .map_err(|e| Error::Transport(format!("{url}: invalid response body: {e}")))?;
        let datum = parsed
            .data
            .into_iter()
            .next()
            .ok_or_else(|| Error::Transport(format!("{url}: empty embeddings response")))?;
        Embedding::new(datum.embedding)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn rejects_non_finite_components() {
        assert!(Embedding::new(vec![1.0, f64::NAN]).is_err());
        assert!(Embedding::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn file_source_answers_by_id_and_text() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"id":0,"text":"hello","vector":[1.0,0.0]}}"#).unwrap();
        writeln!(f, r#"{{"id":1,"vector":[0.0,1.0]}}"#).unwrap();
        let source = FileVectorSource::load(f.path()).unwrap();
        assert_eq!(source.vector_for_id(0).unwrap().values, vec![1.0, 0.0]);
        assert_eq!(source.embed_text("hello").unwrap().values, vec![1.0, 0.0]);
        assert!(source.embed_text("unknown").is_err());
    }
}
