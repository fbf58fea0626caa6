//! Denoising of collaborative-filtering embeddings with conditional
//! diffusion models.
//!
//! A pretrained backend ([`backend`]) yields user and item embeddings. Two
//! small networks ([`diffusion`]) learn to recover each embedding from a
//! noised copy, conditioned on the embedding of the other side of the
//! interaction ([`training`]). At inference ([`inference`]) the averaged
//! embedding of a user's history is noised and walked back through the item
//! network, and the result is rounded to the nearest catalogue items.

pub mod backend;
pub mod data;
pub mod diffusion;
mod error;
pub mod eval;
pub mod inference;
pub mod numerics;
mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::{dot, Scalar};

/// The default precision used by the command-line tools.
pub type Real = f64;
pub type Matrix = numerics::DenseMatrix<Real>;
pub type Embeddings = backend::EmbeddingTable<Real>;
pub type Schedule = diffusion::NoiseSchedule<Real>;
pub type Denoiser = diffusion::DenoiserParams<Real>;

pub type Matrix32 = numerics::DenseMatrix<f32>;
pub type Embeddings32 = backend::EmbeddingTable<f32>;
pub type Schedule32 = diffusion::NoiseSchedule<f32>;
pub type Denoiser32 = diffusion::DenoiserParams<f32>;
