//! Relation extraction driven by an LLM agent with retrieval and memory.
//!
//! The crate is organized around the extraction pipeline:
//!
//! - [`corpus`]: sentences, triples, schemata, micro-F1 scoring, subsampling
//! - [`gateway`]: completion backends (HTTP, scripted, journal replay),
//!   prompt rendering, and strict output parsers
//! - [`retrieval`]: sample indices (random / tf-idf / BM25 / embedding),
//!   candidate relation types, gazetteer entities, a local knowledge store,
//!   and annotation guidelines
//! - [`memory`]: verified-correct/wrong stores, entity-keyed summaries,
//!   reflections, and snapshot persistence
//! - [`agent`]: strategy selection, the thought/action/observation loop,
//!   tool dispatch, and corpus runs
//! - [`distill`]: rationale summarization and SFT dataset export
//! - [`config`]: the resolved run configuration shared by every command
//!
//! Everything is deterministic for a fixed seed when run against the
//! scripted backend; randomness never draws from wall-clock state.

pub mod agent;
pub mod config;
pub mod corpus;
pub mod distill;
pub mod error;
pub mod gateway;
pub mod memory;
pub mod retrieval;

pub use config::RunConfig;
pub use corpus::{Metrics, NormalizationPolicy, RelationType, Sample, Schema, Triple};
pub use error::{Error, Result};
