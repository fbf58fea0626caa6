//! Dense linear algebra, seedable randomness and reverse-mode gradients.
//!
//! Only what the denoiser MLPs and the factorization backends need: no
//! sparse storage, no general broadcasting.

mod autodiff;
mod matrix;
mod rng;

pub use autodiff::{grad, Tape, Var};
pub use matrix::{matmul, DenseMatrix};
pub use rng::{sample_standard_normal, Rng};
