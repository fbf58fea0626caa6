use std::collections::{HashMap, HashSet};

use super::dataset::{Interaction, InteractionDataset, InteractionLog, SplitBoundaries};
use crate::error::{Error, Result};

/// Ratings at or above this value are true positives.
pub const POSITIVE_THRESHOLD: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            valid: 0.1,
            test: 0.2,
        }
    }
}

/// Keeps the latest row for every (user, item) pair; on equal timestamps the
/// row appearing later in the log wins.
fn deduplicate(rows: &[Interaction]) -> Vec<Interaction> {
    let mut latest: HashMap<(usize, usize), usize> = HashMap::new();
    for (idx, r) in rows.iter().enumerate() {
        latest
            .entry((r.user, r.item))
            .and_modify(|k| {
                if r.timestamp >= rows[*k].timestamp {
                    *k = idx;
                }
            })
            .or_insert(idx);
    }
    let mut keep: Vec<usize> = latest.into_values().collect();
    keep.sort_unstable();
    keep.into_iter().map(|k| rows[k]).collect()
}

/// Orders true positives by `(timestamp, user, item)` and cuts them into
/// train/valid/test at `round(n·train)` and `round(n·(train+valid))`.
/// Sub-threshold interactions are set aside for natural-noise injection.
pub fn chronological_split(log: &InteractionLog, ratios: SplitRatios) -> Result<InteractionDataset> {
    let sum = ratios.train + ratios.valid + ratios.test;
    if (sum - 1.0).abs() > 1e-9 || ratios.train < 0.0 || ratios.valid < 0.0 || ratios.test < 0.0 {
        return Err(Error::Contract(format!("split ratios must be non-negative and sum to 1, got {sum}")));
    }
    let rows = deduplicate(&log.interactions);
    let observed: HashSet<(usize, usize)> = rows.iter().map(|r| (r.user, r.item)).collect();
    let (mut positives, false_positives): (Vec<_>, Vec<_>) =
        rows.into_iter().partition(|r| r.rating >= POSITIVE_THRESHOLD);
    if positives.is_empty() {
        return Err(Error::Contract("no true-positive interactions to split".into()));
    }
    positives.sort_by_key(|r| (r.timestamp, r.user, r.item));

    let n = positives.len() as f64;
    let n_train = (n * ratios.train).round() as usize;
    let n_train_valid = ((n * (ratios.train + ratios.valid)).round() as usize).max(n_train);
    let test = positives.split_off(n_train_valid);
    let valid = positives.split_off(n_train);
    let train = positives;

    let start = log.interactions.iter().map(|r| r.timestamp).min().unwrap_or(0);
    let end = log.interactions.iter().map(|r| r.timestamp).max().unwrap_or(start);
    let train_end = train.last().map_or(start, |r| r.timestamp);
    let valid_end = valid.last().map_or(train_end, |r| r.timestamp);

    let (train_noise, valid_noise) = (vec![false; train.len()], vec![false; valid.len()]);
    Ok(InteractionDataset::assemble(
        log.num_users,
        log.num_items,
        log.user_ids.clone(),
        log.item_ids.clone(),
        train,
        valid,
        test,
        train_noise,
        valid_noise,
        SplitBoundaries {
            start,
            train_end,
            valid_end,
            end,
        },
        false_positives,
        observed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(rows: &[(usize, usize, f64, i64)]) -> InteractionLog {
        let num_users = rows.iter().map(|r| r.0).max().unwrap() + 1;
        let num_items = rows.iter().map(|r| r.1).max().unwrap() + 1;
        InteractionLog {
            num_users,
            num_items,
            user_ids: (0..num_users as u64).collect(),
            item_ids: (0..num_items as u64).collect(),
            interactions: rows
                .iter()
                .map(|&(user, item, rating, timestamp)| Interaction { user, item, rating, timestamp })
                .collect(),
        }
    }

    #[test]
    fn ten_positives_split_seven_one_two() {
        let rows: Vec<_> = (0..10).map(|k| (k % 3, k, 5.0, 100 - k as i64)).collect();
        let ds = chronological_split(&log(&rows), SplitRatios::default()).unwrap();
        assert_eq!((ds.train().len(), ds.valid().len(), ds.test().len()), (7, 1, 2));
        let max_train = ds.train().iter().map(|r| r.timestamp).max().unwrap();
        assert!(ds.test().iter().all(|r| r.timestamp >= max_train));
    }

    #[test]
    fn identical_timestamps_use_user_item_tie_break() {
        let rows: Vec<_> = (0..10).rev().map(|k| (k / 5, k, 4.0, 7)).collect();
        let ds = chronological_split(&log(&rows), SplitRatios::default()).unwrap();
        let order: Vec<_> = ds.train().iter().chain(ds.valid()).chain(ds.test()).map(|r| (r.user, r.item)).collect();
        let mut expected = order.clone();
        expected.sort();
        assert_eq!(order, expected);
        assert_eq!(ds.test().iter().map(|r| r.item).collect::<Vec<_>>(), vec![8, 9]);
    }

    #[test]
    fn duplicates_keep_latest_timestamp() {
        // pair (0,0) positive at t=1 then re-rated negative at t=5: not a positive.
        let rows = [(0, 0, 5.0, 1), (0, 0, 2.0, 5), (0, 1, 1.0, 2), (0, 1, 5.0, 3), (1, 1, 4.0, 4)];
        let ds = chronological_split(&log(&rows), SplitRatios { train: 0.5, valid: 0.0, test: 0.5 }).unwrap();
        let all: Vec<_> = ds.train().iter().chain(ds.test()).map(|r| (r.user, r.item, r.timestamp)).collect();
        assert_eq!(all, vec![(0, 1, 3), (1, 1, 4)]);
        assert_eq!(ds.false_positives.len(), 1);
        assert_eq!(ds.false_positives[0].timestamp, 5);
    }

    #[test]
    fn ratios_must_sum_to_one() {
        let rows = [(0, 0, 5.0, 1)];
        assert!(chronological_split(&log(&rows), SplitRatios { train: 0.7, valid: 0.1, test: 0.1 }).is_err());
    }

    #[test]
    fn user_without_train_positives_is_flagged_cold() {
        let mut rows: Vec<_> = (0..8).map(|k| (0, k, 5.0, k as i64)).collect();
        rows.push((1, 0, 5.0, 100));
        rows.push((1, 1, 5.0, 101));
        let ds = chronological_split(&log(&rows), SplitRatios::default()).unwrap();
        assert_eq!(ds.cold_users(), &[1]);
        assert!(!ds.evaluable_users(crate::data::Split::Test).contains(&1));
    }
}
