//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by corpus loading, backends, retrieval stores, memory
/// persistence, and dataset export.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {detail}")]
    MalformedRecord {
        path: String,
        line: usize,
        detail: String,
    },

    #[error("{path}:{line}: unknown relation '{relation}' in gold triple")]
    UnknownRelation {
        path: String,
        line: usize,
        relation: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("subset size {n} exceeds corpus size {len}")]
    SubsetTooLarge { n: usize, len: usize },

    #[error("invalid completion request: {0}")]
    InvalidRequest(String),

    #[error("scripted backend has no rule matching prompt (call {call}): {excerpt}")]
    ScriptMiss { call: u64, excerpt: String },

    #[error("backend transport failure: {0}")]
    Transport(String),

    #[error("journal error: {0}")]
    Journal(String),

    #[error("prompt render error: {0}")]
    Render(String),

    #[error("action parse error: {0}")]
    ActionParse(String),

    #[error("missing vectors for sample ids {0:?}")]
    MissingVectors(Vec<u64>),

    #[error("vector source error: {0}")]
    VectorSource(String),

    #[error("unknown entity id '{0}'")]
    UnknownEntity(String),

    #[error("knowledge store error: {0}")]
    KgStore(String),

    #[error("memory snapshot error: {0}")]
    Snapshot(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("export error: {0}")]
    Export(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an io::Error with the path it occurred on.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
