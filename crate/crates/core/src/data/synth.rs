//! Synthetic interaction logs with planted structure, for experiments and
//! tests where real data is unavailable or too large.

use super::dataset::{Interaction, InteractionLog};
use crate::numerics::Rng;

/// Users and items partitioned into blocks; every user interacts only with
/// items of its own block, more often with the block's popular items.
#[derive(Clone, Debug)]
pub struct PlantedBlocks {
    pub users: usize,
    pub items: usize,
    pub blocks: usize,
    pub interactions_per_user: usize,
    /// Zipf exponent of within-block popularity (0 = uniform).
    pub popularity_skew: f64,
}

impl Default for PlantedBlocks {
    fn default() -> Self {
        Self {
            users: 200,
            items: 100,
            blocks: 2,
            interactions_per_user: 20,
            popularity_skew: 0.8,
        }
    }
}

impl PlantedBlocks {
    pub fn user_block(&self, user: usize) -> usize {
        user * self.blocks / self.users
    }

    pub fn item_block(&self, item: usize) -> usize {
        item * self.blocks / self.items
    }

    pub fn generate(&self, rng: &mut Rng) -> InteractionLog {
        let mut interactions = Vec::with_capacity(self.users * self.interactions_per_user);
        for user in 0..self.users {
            let b = self.user_block(user);
            let block_items: Vec<usize> = (0..self.items).filter(|&i| self.item_block(i) == b).collect();
            let weights: Vec<f64> = (0..block_items.len())
                .map(|rank| 1.0 / ((rank + 1) as f64).powf(self.popularity_skew))
                .collect();
            let n = self.interactions_per_user.min(block_items.len());
            for k in weighted_without_replacement(&weights, n, rng) {
                interactions.push(Interaction {
                    user,
                    item: block_items[k],
                    rating: 5.0,
                    timestamp: rng.int_inclusive(0, 999_999),
                });
            }
        }
        dense_log(self.users, self.items, interactions)
    }
}

/// A latent-factor rating log with the shape of MovieLens-100K: 943 users,
/// 1,682 items, ~100k ratings on a 1–5 scale, heavy-tailed user activity and
/// item popularity, per-user activity windows over a seven-month span.
#[derive(Clone, Debug)]
pub struct LatentRatings {
    pub users: usize,
    pub items: usize,
    pub target_interactions: usize,
    pub min_per_user: usize,
    pub factors: usize,
    /// Cumulative rating shares for ratings 1..=4 (5 takes the rest).
    pub rating_cdf: [f64; 4],
}

impl Default for LatentRatings {
    fn default() -> Self {
        Self {
            users: 943,
            items: 1682,
            target_interactions: 100_000,
            min_per_user: 20,
            factors: 8,
            rating_cdf: [0.061, 0.175, 0.447, 0.788],
        }
    }
}

impl LatentRatings {
    pub fn generate(&self, rng: &mut Rng) -> InteractionLog {
        let k = self.factors;
        let mut normal = |n: usize| (0..n).map(|_| rng.standard_normal()).collect::<Vec<_>>();
        let user_f = normal(self.users * k);
        let item_f = normal(self.items * k);
        let user_bias = normal(self.users);
        let item_quality = normal(self.items);
        let item_pop: Vec<f64> = normal(self.items).into_iter().map(|z| (1.2 * z).exp()).collect();

        // Pareto-like activity scaled so the total lands near the target.
        let raw_activity: Vec<f64> = (0..self.users)
            .map(|_| (1.0 - rng.uniform(0.0, 1.0)).powf(-1.0 / 1.6))
            .collect();
        let extra_total = self.target_interactions.saturating_sub(self.users * self.min_per_user) as f64;
        let raw_sum: f64 = raw_activity.iter().sum();
        let max_items = self.items / 2;

        let span_start = 874_724_710i64;
        let span = 18_561_928i64;
        let inv_sqrt_k = 1.0 / (k as f64).sqrt();
        let mut rows: Vec<(usize, usize, f64, i64)> = Vec::with_capacity(self.target_interactions);
        for u in 0..self.users {
            let n = (self.min_per_user + (extra_total * raw_activity[u] / raw_sum).round() as usize).min(max_items);
            let affinity: Vec<f64> = (0..self.items)
                .map(|i| {
                    let dot: f64 = (0..k).map(|f| user_f[u * k + f] * item_f[i * k + f]).sum();
                    dot * inv_sqrt_k
                })
                .collect();
            let weights: Vec<f64> = (0..self.items).map(|i| item_pop[i] * (0.8 * affinity[i]).exp()).collect();
            let window_start = span_start + rng.int_inclusive(0, span * 4 / 5);
            let window_len = ((span as f64) * rng.uniform(0.05, 1.0)) as i64;
            let window_end = (window_start + window_len).min(span_start + span);
            for i in weighted_without_replacement(&weights, n, rng) {
                let z = 1.2 * affinity[i] + 0.6 * item_quality[i] + 0.4 * user_bias[u] + 0.7 * rng.standard_normal();
                rows.push((u, i, z, rng.int_inclusive(window_start, window_end)));
            }
        }

        let mut sorted: Vec<f64> = rows.iter().map(|r| r.2).collect();
        sorted.sort_by(f64::total_cmp);
        let cuts: Vec<f64> = self
            .rating_cdf
            .iter()
            .map(|&q| sorted[((q * sorted.len() as f64) as usize).min(sorted.len() - 1)])
            .collect();
        let interactions = rows
            .into_iter()
            .map(|(user, item, z, timestamp)| Interaction {
                user,
                item,
                rating: 1.0 + cuts.iter().filter(|&&c| z >= c).count() as f64,
                timestamp,
            })
            .collect();
        dense_log(self.users, self.items, interactions)
    }
}

fn dense_log(users: usize, items: usize, interactions: Vec<Interaction>) -> InteractionLog {
    InteractionLog {
        num_users: users,
        num_items: items,
        user_ids: (1..=users as u64).collect(),
        item_ids: (1..=items as u64).collect(),
        interactions,
    }
}

/// Efraimidis–Spirakis: indices of `n` draws without replacement, each draw
/// proportional to `weights`.
fn weighted_without_replacement(weights: &[f64], n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut keys: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u = rng.uniform(f64::MIN_POSITIVE, 1.0);
            (u.ln() / w, i)
        })
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keys.truncate(n);
    keys.into_iter().map(|(_, i)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn planted_blocks_stay_in_block() {
        let cfg = PlantedBlocks::default();
        let log = cfg.generate(&mut Rng::new(1));
        assert_eq!(log.interactions.len(), 200 * 20);
        let pairs: HashSet<_> = log.interactions.iter().map(|r| (r.user, r.item)).collect();
        assert_eq!(pairs.len(), log.interactions.len());
        assert!(log.interactions.iter().all(|r| cfg.user_block(r.user) == cfg.item_block(r.item)));
    }

    #[test]
    fn latent_ratings_have_movielens_shape() {
        let log = LatentRatings::default().generate(&mut Rng::new(2));
        let n = log.interactions.len();
        assert!((90_000..=110_000).contains(&n), "n = {n}");
        let pos = log.interactions.iter().filter(|r| r.rating >= 4.0).count() as f64 / n as f64;
        assert!((pos - 0.55).abs() < 0.03, "positive share {pos}");
        let mut per_user = vec![0usize; log.num_users];
        for r in &log.interactions {
            per_user[r.user] += 1;
        }
        assert!(per_user.iter().all(|&c| c >= 20));
    }

    #[test]
    fn weighted_sampling_prefers_heavy_items() {
        let mut rng = Rng::new(3);
        let mut hits = 0;
        for _ in 0..1000 {
            hits += usize::from(weighted_without_replacement(&[10.0, 1.0, 1.0], 1, &mut rng)[0] == 0);
        }
        assert!(hits > 750);
    }
}
