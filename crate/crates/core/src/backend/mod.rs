//! Collaborative-filtering backends producing the frozen user/item
//! embeddings the denoisers consume.

mod checkpoint;
mod graph;
mod mf;
mod table;

pub use checkpoint::{read_embeddings, write_embeddings, EMBEDDING_MAGIC};
pub use graph::{propagate_light_graph, LightGraph};
pub use mf::{bpr_loss, init_table, pretrain, BackendConfig, BackendKind, Pretrained};
pub use table::EmbeddingTable;
