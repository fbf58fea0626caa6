use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::scalar::Scalar;

/// Seedable random source.
///
/// Backed by ChaCha8 seeded through `SeedableRng::seed_from_u64`. Normal
/// draws use the ziggurat sampler of `rand_distr::StandardNormal`. Both are
/// value-stable for a pinned dependency set, so a seed fully determines every
/// sequence drawn from it.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for a named role: the seed is the first 8 bytes of
    /// `SHA-256(seed_le || tag)`. Does not advance `self`.
    pub fn derive(&self, tag: &str) -> Rng {
        Rng::new(derive_seed(self.seed, tag))
    }

    /// Like [`Rng::derive`] with a numeric discriminator (user id, epoch, ...).
    pub fn derive_indexed(&self, tag: &str, index: u64) -> Rng {
        Rng::new(derive_seed(derive_seed(self.seed, tag), &index.to_string()))
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn fill_normal<S: Scalar>(&mut self, out: &mut [S]) {
        for v in out {
            *v = S::of(self.standard_normal());
        }
    }

    /// Uniform real in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    /// Uniform index in `0..n`; `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "Rng::index on empty range");
        self.inner.random_range(0..n)
    }

    /// Uniform integer in the closed range `[lo, hi]`.
    pub fn int_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        self.inner.random_range(lo..=hi)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }
}

pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

/// `n` i.i.d. standard-normal draws.
pub fn sample_standard_normal(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.standard_normal()).collect()
}
