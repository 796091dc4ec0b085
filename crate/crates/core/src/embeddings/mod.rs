//! Clip embeddings: the built-in pooled log-mel embedder and the binary
//! store through which externally computed embeddings also enter.

mod pool;
mod store;

pub use pool::{featurize, pool_embed};
pub use store::{load_store, save_store, ClipMeta, EmbeddingStore};
