//! Interaction logs, chronological splits, noise injection and BPR triplet
//! sampling.

mod dataset;
mod io;
mod noise;
mod sampler;
mod split;
pub mod synth;

pub use dataset::{Interaction, InteractionDataset, InteractionLog, Split, SplitBoundaries, NOISE_RATING};
pub use io::{load_interactions, read_manifest, write_interactions, write_manifest};
pub use noise::{apply_natural_noise, apply_random_noise, NoiseSetting};
pub use sampler::{sample_triplet, Triplet};
pub use split::{chronological_split, SplitRatios, POSITIVE_THRESHOLD};
