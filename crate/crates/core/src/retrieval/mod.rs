//! Local evidence store: corpus ingestion, tokenization and a BM25 index.

mod corpus;
mod index;
mod tokenize;

use thiserror::Error;

pub use corpus::{Corpus, CorpusDoc};
pub use index::{Bm25Index, Bm25Params, Retriever, INDEX_FORMAT_VERSION};
pub use tokenize::tokenize;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("document `{0}` has empty text")]
    EmptyText(String),
    #[error("document id must be non-empty (line {0})")]
    EmptyId(usize),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("index snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
