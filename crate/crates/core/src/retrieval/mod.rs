//! Sample retrieval over four encoder kinds, candidate relation types, and
//! relevant-information retrieval over a gazetteer-backed knowledge store
//! and annotation guidelines.

mod candidates;
mod guidelines;
mod index;
mod kg;
mod tokenize;
mod vectors;

pub use candidates::{retrieve_candidate_relations, CandidateMethod, RelationPrior};
pub use guidelines::{load_guidelines, retrieve_guidelines, GuidelineSnippet, GENERAL_RELATION};
pub use index::{
    build_index, retrieve_samples, retrieve_samples_excluding, EncoderKind, IndexConfig,
    RetrievalHit, RetrievalOutput, SampleIndex,
};
pub use kg::{
    link_entity, recognize_entities_gazetteer, recognize_entities_llm, retrieve_entity_triples,
    EntityMethod, KgStore, KgTriple, Mention,
};
pub use tokenize::{tokenize, TokenizerKind};
pub use vectors::{Embedding, FileVectorSource, HttpVectorSource, StaticVectorSource, VectorSource};
