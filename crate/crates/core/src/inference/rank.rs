use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::backend::EmbeddingTable;
use crate::error::{dim_mismatch, Error, Result};
use crate::scalar::{dot, Scalar};

/// Top-K items for one user, best first.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedList<S> {
    pub user: usize,
    pub items: Vec<usize>,
    pub scores: Vec<S>,
    /// Fewer than K candidates were available.
    pub truncated: bool,
}

fn better<S: Scalar>(a: &(S, usize), b: &(S, usize)) -> Ordering {
    // NaN ranks last; equal scores go to the smaller item id.
    let key = |s: S| if s.is_nan() { S::neg_infinity() } else { s };
    key(b.0)
        .partial_cmp(&key(a.0))
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

/// Top-`k` of a full catalogue score vector, skipping the sorted `exclusions`.
pub fn rank_scores<S: Scalar>(user: usize, scores: &[S], exclusions: &[usize], k: usize) -> Result<RankedList<S>> {
    if k == 0 {
        return Err(Error::Contract("K must be at least 1".into()));
    }
    let mut cand: Vec<(S, usize)> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| exclusions.binary_search(i).is_err())
        .map(|(i, &s)| (s, i))
        .collect();
    let truncated = cand.len() < k;
    if cand.len() > k {
        cand.select_nth_unstable_by(k - 1, better);
        cand.truncate(k);
    }
    cand.sort_unstable_by(better);
    Ok(RankedList {
        user,
        items: cand.iter().map(|c| c.1).collect(),
        scores: cand.iter().map(|c| c.0).collect(),
        truncated,
    })
}

/// Ranks every non-excluded item by inner product with `ideal`.
pub fn round_to_items<S: Scalar>(
    user: usize,
    ideal: &[S],
    tables: &EmbeddingTable<S>,
    exclusions: &[usize],
    k: usize,
) -> Result<RankedList<S>> {
    if ideal.len() != tables.dim() {
        return Err(dim_mismatch("round_to_items", tables.dim(), ideal.len()));
    }
    let scores: Vec<S> = (0..tables.num_items()).map(|i| dot(ideal, tables.item(i))).collect();
    rank_scores(user, &scores, exclusions, k)
}

/// `user_id,rank,item_id,score` with raw ids and 1-based ranks.
pub fn write_recommendations<S: Scalar>(
    lists: &[RankedList<S>],
    user_ids: &[u64],
    item_ids: &[u64],
    path: impl AsRef<Path>,
    header: &[String],
) -> Result<()> {
    let mut out = String::new();
    for h in header {
        writeln!(out, "# {h}").unwrap();
    }
    out.push_str("user_id,rank,item_id,score\n");
    for list in lists {
        for (r, (&i, s)) in list.items.iter().zip(&list.scores).enumerate() {
            writeln!(out, "{},{},{},{:.9e}", user_ids[list.user], r + 1, item_ids[i], s.as_f64()).unwrap();
        }
    }
    fs::write(path, out)?;
    Ok(())
}
