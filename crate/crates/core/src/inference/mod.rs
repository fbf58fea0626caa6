//! Ideal-item generation and rounding to catalogue items.

mod generate;
mod rank;

pub use generate::{average_liked_embedding, generate_ideal_item, InferenceConfig, StartMode};
pub use rank::{rank_scores, round_to_items, write_recommendations, RankedList};
