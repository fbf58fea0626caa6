//! `DDRMEMB1` embedding checkpoints: magic, `u32` LE num_users, num_items,
//! dim, then user rows and item rows as `f32` LE, row-major.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::EmbeddingTable;
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

pub const EMBEDDING_MAGIC: &[u8; 8] = b"DDRMEMB1";

pub fn write_embeddings<S: Scalar>(table: &EmbeddingTable<S>, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::with_capacity(20 + 4 * (table.num_users() + table.num_items()) * table.dim());
    buf.extend_from_slice(EMBEDDING_MAGIC);
    for n in [table.num_users(), table.num_items(), table.dim()] {
        let n = u32::try_from(n).map_err(|_| Error::Checkpoint(format!("{n} does not fit in u32")))?;
        buf.extend_from_slice(&n.to_le_bytes());
    }
    for v in table.users().as_slice().iter().chain(table.items().as_slice()) {
        let f = v.to_f32().unwrap_or(f32::NAN);
        buf.extend_from_slice(&f.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_embeddings<S: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingTable<S>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 20 || &bytes[..8] != EMBEDDING_MAGIC {
        return Err(Error::Checkpoint("missing DDRMEMB1 magic".into()));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[8 + 4 * k..12 + 4 * k].try_into().unwrap()) as usize;
    let (users, items, dim) = (word(0), word(1), word(2));
    let expected = 20 + 4 * (users + items) * dim;
    if bytes.len() != expected {
        return Err(Error::Checkpoint(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let values: Vec<S> = bytes[20..]
        .chunks_exact(4)
        .map(|c| S::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    let (u, i) = values.split_at(users * dim);
    EmbeddingTable::new(
        DenseMatrix::from_vec(users, dim, u.to_vec())?,
        DenseMatrix::from_vec(items, dim, i.to_vec())?,
    )
}
