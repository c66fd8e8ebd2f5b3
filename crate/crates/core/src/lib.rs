//! Search-only translation memory.
//!
//! Text is extracted ([`extraction`]), split into sentences ([`tokenizer`]) and
//! stored once per distinct sentence behind a [`store::Repository`]. Repetition
//! statistics ([`metrics`]), sentence-count ceilings ([`limits`]) and volume
//! projections ([`projection`]) are computed over the store, and new text is
//! translated by exact sentence lookup ([`translation`]).

pub mod error;
pub mod extraction;
pub mod limits;
pub mod metrics;
pub mod pipeline;
pub mod projection;
pub mod store;
pub mod tokenizer;
pub mod translation;
pub mod validation;

#[cfg(test)]
mod testdata;

pub use error::{Error, Result};
pub use extraction::{PlainText, RawContent};
pub use metrics::{CorpusMetrics, Scope};
pub use store::{
    compute_md5, ingest_document, DocumentId, IngestStats, Md5Hash, MemoryStore, NewDocument,
    Repository, SentenceId, SqliteStore, TranslationId,
};
pub use tokenizer::Tokenizer;
pub use validation::RuleSet;
