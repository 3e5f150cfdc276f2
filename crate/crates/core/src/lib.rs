//! Compressed dense-retrieval indexes.
//!
//! Passage embeddings can be shrunk three ways, alone or combined:
//!
//! * [`reduce`]: PCA to fewer dimensions, optionally followed by a
//!   layer-style normalization;
//! * [`pq`] / [`index`]: half-precision storage or product quantization;
//! * [`filter`]: dropping whole articles a linear title/category classifier
//!   considers unlikely to answer questions.
//!
//! [`eval`] measures what each setting costs in retrieval accuracy and bytes.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod filter;
pub mod index;
pub mod kmeans;
pub mod pq;
pub mod reduce;
pub mod topk;
pub mod util;

pub use error::{Error, Result};
pub use topk::Hit;
