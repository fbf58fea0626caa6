use std::collections::HashSet;

/// Rating recorded for injected random-noise interactions.
pub const NOISE_RATING: f64 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub rating: f64,
    pub timestamp: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "valid" => Some(Split::Valid),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Unsplit interaction log with dense ids.
///
/// `user_ids[u]` / `item_ids[i]` hold the raw id that dense index `u` / `i`
/// was assigned from; dense ids follow ascending raw id order.
#[derive(Clone, Debug)]
pub struct InteractionLog {
    pub num_users: usize,
    pub num_items: usize,
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
    pub interactions: Vec<Interaction>,
}

/// Timestamp ranges of the three chronological splits (inclusive ends).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitBoundaries {
    pub start: i64,
    pub train_end: i64,
    pub valid_end: i64,
    pub end: i64,
}

/// A split dataset plus noise bookkeeping.
///
/// Immutable once built: the noise injectors consume a dataset and return a
/// new one.
#[derive(Clone, Debug)]
pub struct InteractionDataset {
    pub num_users: usize,
    pub num_items: usize,
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
    pub(crate) train: Vec<Interaction>,
    pub(crate) valid: Vec<Interaction>,
    pub(crate) test: Vec<Interaction>,
    pub(crate) train_noise: Vec<bool>,
    pub(crate) valid_noise: Vec<bool>,
    pub(crate) boundaries: SplitBoundaries,
    /// Deduplicated sub-threshold interactions, kept for natural noise.
    pub(crate) false_positives: Vec<Interaction>,
    /// Every (user, item) pair present in the deduplicated log.
    pub(crate) observed: HashSet<(usize, usize)>,
    train_pos: Vec<Vec<usize>>,
    valid_pos: Vec<Vec<usize>>,
    test_pos: Vec<Vec<usize>>,
    cold_users: Vec<usize>,
}

fn per_user(num_users: usize, rows: &[Interaction]) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); num_users];
    for r in rows {
        sets[r.user].push(r.item);
    }
    for s in &mut sets {
        s.sort_unstable();
        s.dedup();
    }
    sets
}

impl InteractionDataset {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        num_users: usize,
        num_items: usize,
        user_ids: Vec<u64>,
        item_ids: Vec<u64>,
        train: Vec<Interaction>,
        valid: Vec<Interaction>,
        test: Vec<Interaction>,
        train_noise: Vec<bool>,
        valid_noise: Vec<bool>,
        boundaries: SplitBoundaries,
        false_positives: Vec<Interaction>,
        observed: HashSet<(usize, usize)>,
    ) -> Self {
        let train_pos = per_user(num_users, &train);
        let valid_pos = per_user(num_users, &valid);
        let test_pos = per_user(num_users, &test);
        let cold_users = (0..num_users)
            .filter(|&u| train_pos[u].is_empty() && (!test_pos[u].is_empty() || !valid_pos[u].is_empty()))
            .collect::<Vec<_>>();
        if !cold_users.is_empty() {
            log::debug!("{} users have no training positives and are skipped at evaluation", cold_users.len());
        }
        Self {
            num_users,
            num_items,
            user_ids,
            item_ids,
            train,
            valid,
            test,
            train_noise,
            valid_noise,
            boundaries,
            false_positives,
            observed,
            train_pos,
            valid_pos,
            test_pos,
            cold_users,
        }
    }

    pub(crate) fn rebuilt(self) -> Self {
        Self::assemble(
            self.num_users,
            self.num_items,
            self.user_ids,
            self.item_ids,
            self.train,
            self.valid,
            self.test,
            self.train_noise,
            self.valid_noise,
            self.boundaries,
            self.false_positives,
            self.observed,
        )
    }

    pub fn train(&self) -> &[Interaction] {
        &self.train
    }

    pub fn valid(&self) -> &[Interaction] {
        &self.valid
    }

    pub fn test(&self) -> &[Interaction] {
        &self.test
    }

    pub fn split(&self, split: Split) -> &[Interaction] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    /// Injected-noise flags aligned with `train()`.
    pub fn train_noise(&self) -> &[bool] {
        &self.train_noise
    }

    /// Injected-noise flags aligned with `valid()`.
    pub fn valid_noise(&self) -> &[bool] {
        &self.valid_noise
    }

    pub fn boundaries(&self) -> SplitBoundaries {
        self.boundaries
    }

    /// Sorted training items of `user` (organic and injected).
    pub fn train_items(&self, user: usize) -> &[usize] {
        &self.train_pos[user]
    }

    pub fn valid_items(&self, user: usize) -> &[usize] {
        &self.valid_pos[user]
    }

    pub fn test_items(&self, user: usize) -> &[usize] {
        &self.test_pos[user]
    }

    pub fn is_train_positive(&self, user: usize, item: usize) -> bool {
        self.train_pos[user].binary_search(&item).is_ok()
    }

    /// Items a user may not be recommended when scoring `target`: train
    /// positives for validation, train ∪ valid positives for test.
    pub fn exclusions(&self, user: usize, target: Split) -> Vec<usize> {
        let mut ex = self.train_pos[user].clone();
        if target == Split::Test {
            ex.extend_from_slice(&self.valid_pos[user]);
            ex.sort_unstable();
            ex.dedup();
        }
        ex
    }

    /// Users with held-out positives but nothing to train on.
    pub fn cold_users(&self) -> &[usize] {
        &self.cold_users
    }

    /// Users that can be scored against `target`: non-empty relevant set and
    /// at least one training positive.
    pub fn evaluable_users(&self, target: Split) -> Vec<usize> {
        let rel = match target {
            Split::Train => &self.train_pos,
            Split::Valid => &self.valid_pos,
            Split::Test => &self.test_pos,
        };
        (0..self.num_users)
            .filter(|&u| !rel[u].is_empty() && !self.train_pos[u].is_empty())
            .collect()
    }

    pub fn relevant(&self, user: usize, target: Split) -> &[usize] {
        match target {
            Split::Train => &self.train_pos[user],
            Split::Valid => &self.valid_pos[user],
            Split::Test => &self.test_pos[user],
        }
    }

    pub fn noise_count(&self) -> (usize, usize) {
        (
            self.train_noise.iter().filter(|&&f| f).count(),
            self.valid_noise.iter().filter(|&&f| f).count(),
        )
    }
}
