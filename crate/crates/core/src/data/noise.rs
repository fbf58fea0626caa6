use std::collections::HashSet;

use super::dataset::{Interaction, InteractionDataset, NOISE_RATING};
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// How the training and validation splits are corrupted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseSetting {
    Clean,
    /// Observed sub-threshold ratings join train/valid.
    Natural,
    /// Unobserved pairs are injected at the given fraction of each split.
    Random(f64),
}

impl NoiseSetting {
    pub fn apply(self, ds: InteractionDataset, rng: &mut Rng) -> Result<InteractionDataset> {
        match self {
            NoiseSetting::Clean => Ok(ds),
            NoiseSetting::Natural => Ok(apply_natural_noise(ds)),
            NoiseSetting::Random(ratio) => apply_random_noise(ds, ratio, rng),
        }
    }
}

/// Adds the observed false positives to train (timestamps up to the train
/// boundary) or valid (up to the valid boundary). Later ones would fall into
/// the test period and are dropped.
pub fn apply_natural_noise(ds: InteractionDataset) -> InteractionDataset {
    let mut ds = ds;
    let b = ds.boundaries;
    let mut fps = std::mem::take(&mut ds.false_positives);
    fps.sort_by_key(|r| (r.timestamp, r.user, r.item));
    for r in &fps {
        if r.timestamp <= b.train_end {
            ds.train.push(*r);
            ds.train_noise.push(true);
        } else if r.timestamp <= b.valid_end {
            ds.valid.push(*r);
            ds.valid_noise.push(true);
        }
    }
    ds.false_positives = fps;
    ds.rebuilt()
}

/// Injects `⌊ratio·|train|⌋` unobserved pairs into train and `⌊ratio·|valid|⌋`
/// into valid, drawn uniformly without replacement from pairs absent in the
/// whole log. Injected rows carry [`NOISE_RATING`] and a timestamp uniform
/// over their split's time range.
pub fn apply_random_noise(ds: InteractionDataset, ratio: f64, rng: &mut Rng) -> Result<InteractionDataset> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Contract(format!("noise ratio {ratio} outside [0, 1]")));
    }
    if ratio > 0.6 {
        log::warn!("noise ratio {ratio} is above the 0.6 studied range");
    }
    let n_train = (ratio * ds.train.len() as f64).floor() as usize;
    let n_valid = (ratio * ds.valid.len() as f64).floor() as usize;
    let requested = n_train + n_valid;
    if requested == 0 {
        return Ok(ds);
    }
    let mut taken: HashSet<(usize, usize)> = ds.observed.clone();
    for r in ds.train.iter().chain(&ds.valid).chain(&ds.test) {
        taken.insert((r.user, r.item));
    }
    let total = ds.num_users * ds.num_items;
    let available = total - taken.len();
    if requested > available {
        return Err(Error::InsufficientUnobserved { requested, available });
    }

    let pairs: Vec<(usize, usize)> = if requested * 2 <= available {
        let mut out = Vec::with_capacity(requested);
        while out.len() < requested {
            let pair = (rng.index(ds.num_users), rng.index(ds.num_items));
            if taken.insert(pair) {
                out.push(pair);
            }
        }
        out
    } else {
        let mut free: Vec<(usize, usize)> = (0..ds.num_users)
            .flat_map(|u| (0..ds.num_items).map(move |i| (u, i)))
            .filter(|p| !taken.contains(p))
            .collect();
        rng.shuffle(&mut free);
        free.truncate(requested);
        free
    };

    let mut ds = ds;
    let b = ds.boundaries;
    let valid_lo = if b.valid_end > b.train_end { b.train_end + 1 } else { b.valid_end };
    for (k, &(user, item)) in pairs.iter().enumerate() {
        let (lo, hi, to_train) = if k < n_train {
            (b.start, b.train_end, true)
        } else {
            (valid_lo, b.valid_end, false)
        };
        let row = Interaction {
            user,
            item,
            rating: NOISE_RATING,
            timestamp: rng.int_inclusive(lo, hi.max(lo)),
        };
        if to_train {
            ds.train.push(row);
            ds.train_noise.push(true);
        } else {
            ds.valid.push(row);
            ds.valid_noise.push(true);
        }
    }
    Ok(ds.rebuilt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{chronological_split, InteractionLog, SplitRatios};

    fn dataset(rows: &[(usize, usize, f64, i64)], users: usize, items: usize) -> InteractionDataset {
        let log = InteractionLog {
            num_users: users,
            num_items: items,
            user_ids: (0..users as u64).collect(),
            item_ids: (0..items as u64).collect(),
            interactions: rows
                .iter()
                .map(|&(user, item, rating, timestamp)| Interaction { user, item, rating, timestamp })
                .collect(),
        };
        chronological_split(&log, SplitRatios::default()).unwrap()
    }

    fn positives(n: usize, users: usize, items: usize) -> Vec<(usize, usize, f64, i64)> {
        (0..n).map(|k| (k % users, (k * 7) % items, 5.0, k as i64 * 10)).collect()
    }

    #[test]
    fn natural_noise_without_false_positives_is_identity() {
        let ds = dataset(&positives(10, 2, 10), 2, 10);
        let noisy = apply_natural_noise(ds.clone());
        assert_eq!(noisy.train(), ds.train());
        assert_eq!(noisy.valid(), ds.valid());
    }

    #[test]
    fn false_positive_in_train_range_is_flagged() {
        let mut rows = positives(10, 2, 10);
        rows.push((1, 8, 2.0, 15));
        let noisy = apply_natural_noise(dataset(&rows, 2, 10));
        let k = noisy.train().iter().position(|r| r.rating == 2.0).unwrap();
        assert!(noisy.train_noise()[k]);
        assert_eq!(noisy.train().len(), 8);
        assert!(noisy.test().iter().all(|r| r.rating >= 4.0));
    }

    #[test]
    fn false_positive_in_test_range_is_dropped() {
        let mut rows = positives(10, 2, 10);
        rows.push((1, 8, 1.0, 1_000));
        let ds = dataset(&rows, 2, 10);
        let noisy = apply_natural_noise(ds.clone());
        assert_eq!(noisy.train().len() + noisy.valid().len(), ds.train().len() + ds.valid().len());
    }

    #[test]
    fn zero_ratio_is_identity() {
        let ds = dataset(&positives(40, 3, 20), 3, 20);
        let out = apply_random_noise(ds.clone(), 0.0, &mut Rng::new(1)).unwrap();
        assert_eq!(out.train(), ds.train());
        assert_eq!(out.valid(), ds.valid());
    }

    #[test]
    fn injects_exact_counts_without_collisions() {
        let ds = dataset(&positives(143, 11, 50), 11, 50);
        assert_eq!(ds.train().len(), 100);
        let out = apply_random_noise(ds.clone(), 0.2, &mut Rng::new(5)).unwrap();
        assert_eq!(out.noise_count().0, 20);
        assert_eq!(out.train().len(), 120);
        assert_eq!(out.noise_count().1, (0.2 * ds.valid().len() as f64).floor() as usize);
        // brute-force collision scan against every pre-existing pair
        let original: Vec<(usize, usize)> = ds.train().iter().chain(ds.valid()).chain(ds.test()).map(|r| (r.user, r.item)).collect();
        let injected: Vec<(usize, usize)> = out
            .train()
            .iter()
            .zip(out.train_noise())
            .chain(out.valid().iter().zip(out.valid_noise()))
            .filter(|(_, &f)| f)
            .map(|(r, _)| (r.user, r.item))
            .collect();
        for (a, p) in injected.iter().enumerate() {
            assert!(!original.contains(p));
            assert!(!injected[a + 1..].contains(p));
        }
        assert!(out.test() == ds.test());
        let b = out.boundaries();
        for (r, &f) in out.train().iter().zip(out.train_noise()) {
            if f {
                assert!(r.timestamp >= b.start && r.timestamp <= b.train_end);
                assert_eq!(r.rating, NOISE_RATING);
            }
        }
    }

    #[test]
    fn dense_catalog_falls_back_to_enumeration() {
        let ds = dataset(&positives(12, 3, 8), 3, 8);
        let out = apply_random_noise(ds, 0.9, &mut Rng::new(2)).unwrap();
        assert!(out.noise_count().0 > 0);
    }

    #[test]
    fn not_enough_unobserved_pairs() {
        let rows: Vec<_> = (0..4).map(|k| (k / 2, k % 2, 5.0, k as i64)).collect();
        let ds = dataset(&rows, 2, 2);
        assert!(matches!(
            apply_random_noise(ds, 1.0, &mut Rng::new(1)),
            Err(Error::InsufficientUnobserved { .. })
        ));
    }

    #[test]
    fn injection_is_deterministic() {
        let ds = dataset(&positives(143, 11, 50), 11, 50);
        let a = apply_random_noise(ds.clone(), 0.4, &mut Rng::new(11)).unwrap();
        let b = apply_random_noise(ds, 0.4, &mut Rng::new(11)).unwrap();
        assert_eq!(a.train(), b.train());
        assert_eq!(a.valid(), b.valid());
    }
}
