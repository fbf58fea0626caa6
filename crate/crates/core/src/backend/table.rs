use sha2::{Digest, Sha256};

use crate::error::{dim_mismatch, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

/// User and item embedding matrices sharing one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable<S> {
    users: DenseMatrix<S>,
    items: DenseMatrix<S>,
}

impl<S: Scalar> EmbeddingTable<S> {
    pub fn new(users: DenseMatrix<S>, items: DenseMatrix<S>) -> Result<Self> {
        if users.cols() != items.cols() {
            return Err(dim_mismatch("EmbeddingTable::new", users.cols(), items.cols()));
        }
        if users.cols() == 0 {
            return Err(crate::Error::Contract("embedding dimension must be positive".into()));
        }
        Ok(Self { users, items })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.users.cols()
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        self.users.rows()
    }

    #[inline]
    pub fn num_items(&self) -> usize {
        self.items.rows()
    }

    #[inline]
    pub fn user(&self, u: usize) -> &[S] {
        self.users.row(u)
    }

    #[inline]
    pub fn item(&self, i: usize) -> &[S] {
        self.items.row(i)
    }

    pub fn users(&self) -> &DenseMatrix<S> {
        &self.users
    }

    pub fn items(&self) -> &DenseMatrix<S> {
        &self.items
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut DenseMatrix<S>, &mut DenseMatrix<S>) {
        (&mut self.users, &mut self.items)
    }

    pub fn is_finite(&self) -> bool {
        self.users.is_finite() && self.items.is_finite()
    }

    /// SHA-256 over the shape and the little-endian `f64` image of every entry.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for n in [self.num_users(), self.num_items(), self.dim()] {
            h.update((n as u64).to_le_bytes());
        }
        for v in self.users.as_slice().iter().chain(self.items.as_slice()) {
            h.update(v.as_f64().to_le_bytes());
        }
        h.finalize().into()
    }

    pub fn cast<T: Scalar>(&self) -> EmbeddingTable<T> {
        EmbeddingTable {
            users: self.users.cast(),
            items: self.items.cast(),
        }
    }
}
