use super::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::numerics::Rng;

const MAX_USER_RETRIES: usize = 100;
const MAX_REJECTIONS: usize = 64;

/// A BPR training triplet: `user` interacted with `positive` but not `negative`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Triplet {
    pub user: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Draws `(u, i)` uniformly from the training rows and `j` uniformly from the
/// items `u` has no training interaction with.
pub fn sample_triplet(ds: &InteractionDataset, rng: &mut Rng) -> Result<Triplet> {
    let train = ds.train();
    if train.is_empty() {
        return Err(Error::Sampling("training split is empty".into()));
    }
    for _ in 0..MAX_USER_RETRIES {
        let row = train[rng.index(train.len())];
        let owned = ds.train_items(row.user);
        if owned.len() >= ds.num_items {
            continue;
        }
        if let Some(negative) = sample_negative(ds.num_items, owned, rng) {
            return Ok(Triplet {
                user: row.user,
                positive: row.item,
                negative,
            });
        }
    }
    Err(Error::Sampling(format!(
        "no negative item found after {MAX_USER_RETRIES} user draws"
    )))
}

/// Uniform over `0..num_items` minus the sorted `owned` set.
fn sample_negative(num_items: usize, owned: &[usize], rng: &mut Rng) -> Option<usize> {
    for _ in 0..MAX_REJECTIONS {
        let j = rng.index(num_items);
        if owned.binary_search(&j).is_err() {
            return Some(j);
        }
    }
    // Dense users: pick the k-th free item directly.
    let free = num_items - owned.len();
    if free == 0 {
        return None;
    }
    let mut k = rng.index(free);
    let mut owned_iter = owned.iter().peekable();
    for j in 0..num_items {
        if owned_iter.peek() == Some(&&j) {
            owned_iter.next();
            continue;
        }
        if k == 0 {
            return Some(j);
        }
        k -= 1;
    }
    None
}
