//! Corpus I/O: embedding files, passage/query JSONL and synthetic corpora.

mod embeddings;
mod records;
mod synth;

pub use embeddings::{load_embeddings, save_embeddings, EmbeddingMatrix, EMB_HEADER_LEN, EMB_MAGIC, EMB_VERSION};
pub use records::{
    load_id_list, load_passages, load_queries, parse_passages, parse_queries, save_id_list,
    save_jsonl, to_jsonl, PassageRecord, QueryRecord,
};
pub use synth::{generate_synthetic, SyntheticCorpus, SyntheticSpec};
