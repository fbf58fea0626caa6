use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::metrics::{ndcg_at_k, recall_at_k};
use crate::backend::EmbeddingTable;
use crate::data::{InteractionDataset, Split};
use crate::diffusion::{DenoiserParams, NoiseSchedule};
use crate::error::{Error, Result};
use crate::inference::{generate_ideal_item, rank_scores, InferenceConfig, RankedList};
use crate::numerics::Rng;
use crate::scalar::{dot, Scalar};

/// Produces a score for every catalogue item for one user.
pub trait Scorer<S>: Sync {
    fn score_user(&self, user: usize, rng: &mut Rng) -> Result<Vec<S>>;
}

/// `e_u · e_i` straight from the backend embeddings.
pub struct BackendScorer<'a, S> {
    pub tables: &'a EmbeddingTable<S>,
}

impl<S: Scalar> Scorer<S> for BackendScorer<'_, S> {
    fn score_user(&self, user: usize, _rng: &mut Rng) -> Result<Vec<S>> {
        let eu = self.tables.user(user);
        Ok((0..self.tables.num_items()).map(|i| dot(eu, self.tables.item(i))).collect())
    }
}

/// Generated ideal item embedding against every catalogue item.
pub struct DdrmScorer<'a, S> {
    pub ds: &'a InteractionDataset,
    pub tables: &'a EmbeddingTable<S>,
    pub params: &'a DenoiserParams<S>,
    pub schedule: &'a NoiseSchedule<S>,
    pub config: InferenceConfig,
}

impl<S: Scalar> Scorer<S> for DdrmScorer<'_, S> {
    fn score_user(&self, user: usize, rng: &mut Rng) -> Result<Vec<S>> {
        let ideal = generate_ideal_item(user, self.ds, self.tables, self.params, self.schedule, &self.config, rng)?;
        Ok((0..self.tables.num_items()).map(|i| dot(&ideal, self.tables.item(i))).collect())
    }
}

/// Scores every held-out item of `target` 1 and everything else 0.
pub struct OracleScorer<'a> {
    pub ds: &'a InteractionDataset,
    pub target: Split,
}

impl<S: Scalar> Scorer<S> for OracleScorer<'_> {
    fn score_user(&self, user: usize, _rng: &mut Rng) -> Result<Vec<S>> {
        let mut s = vec![S::zero(); self.ds.num_items];
        for &i in self.ds.relevant(user, self.target) {
            s[i] = S::one();
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserMetrics {
    pub user: usize,
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
}

/// Recall@K and NDCG@K averaged over evaluable users.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub ks: Vec<usize>,
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub per_user: Vec<UserMetrics>,
    pub n_users: usize,
    pub config_hash: String,
}

impl MetricReport {
    fn position(&self, k: usize) -> usize {
        self.ks.iter().position(|&x| x == k).unwrap_or_else(|| panic!("K = {k} was not evaluated"))
    }

    pub fn recall_at(&self, k: usize) -> f64 {
        self.recall[self.position(k)]
    }

    pub fn ndcg_at(&self, k: usize) -> f64 {
        self.ndcg[self.position(k)]
    }

    pub fn with_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = hash.into();
        self
    }
}

fn worker_count(users: usize) -> usize {
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    cores.min(users.div_ceil(16)).max(1)
}

/// Ranks the top `k` items for each user in `users`, one independent random
/// stream per user, fanned out over threads with order-preserving collection.
pub fn rank_users<S: Scalar, Sc: Scorer<S> + ?Sized>(
    scorer: &Sc,
    ds: &InteractionDataset,
    users: &[usize],
    target: Split,
    k: usize,
    rng: &Rng,
) -> Result<Vec<RankedList<S>>> {
    let run = |u: usize| -> Result<RankedList<S>> {
        let mut user_rng = rng.derive_indexed("eval-user", u as u64);
        let scores = scorer.score_user(u, &mut user_rng)?;
        if scores.len() != ds.num_items {
            return Err(Error::Contract(format!("scorer returned {} scores for {} items", scores.len(), ds.num_items)));
        }
        rank_scores(u, &scores, &ds.exclusions(u, target), k)
    };
    let workers = worker_count(users.len());
    if workers == 1 {
        return users.iter().map(|&u| run(u)).collect();
    }
    let chunk = users.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = users
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|&u| run(u)).collect::<Result<Vec<_>>>()))
            .collect();
        let mut out = Vec::with_capacity(users.len());
        for h in handles {
            out.extend(h.join().expect("evaluation worker panicked")?);
        }
        Ok(out)
    })
}

/// Full-ranking evaluation against `target`, excluding each user's known
/// positives (train for validation, train ∪ valid for test).
pub fn evaluate<S: Scalar, Sc: Scorer<S> + ?Sized>(
    scorer: &Sc,
    ds: &InteractionDataset,
    target: Split,
    ks: &[usize],
    rng: &Rng,
) -> Result<MetricReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Contract("K list must be non-empty and positive".into()));
    }
    let users = ds.evaluable_users(target);
    let max_k = *ks.iter().max().unwrap();
    let lists = rank_users(scorer, ds, &users, target, max_k, rng)?;
    Ok(summarize(ds, target, ks, &lists))
}

/// Metrics of already ranked lists against `target`.
pub fn summarize<S: Scalar>(ds: &InteractionDataset, target: Split, ks: &[usize], lists: &[RankedList<S>]) -> MetricReport {
    let mut per_user = Vec::with_capacity(lists.len());
    for list in lists {
        let rel = ds.relevant(list.user, target);
        per_user.push(UserMetrics {
            user: list.user,
            recall: ks.iter().map(|&k| recall_at_k(&list.items, rel, k)).collect(),
            ndcg: ks.iter().map(|&k| ndcg_at_k(&list.items, rel, k)).collect(),
        });
    }
    let n = per_user.len();
    let mean = |f: &dyn Fn(&UserMetrics) -> f64| {
        if n == 0 {
            f64::NAN
        } else {
            per_user.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let recall = (0..ks.len()).map(|k| mean(&|m| m.recall[k])).collect();
    let ndcg = (0..ks.len()).map(|k| mean(&|m| m.ndcg[k])).collect();
    MetricReport {
        ks: ks.to_vec(),
        recall,
        ndcg,
        per_user,
        n_users: n,
        config_hash: String::new(),
    }
}

/// `metric,k,value,n_users,config_hash`, Recall rows then NDCG rows.
pub fn write_metric_report(report: &MetricReport, path: impl AsRef<Path>, header: &[String]) -> Result<()> {
    let mut out = String::new();
    for h in header {
        writeln!(out, "# {h}").unwrap();
    }
    out.push_str("metric,k,value,n_users,config_hash\n");
    for (name, values) in [("recall", &report.recall), ("ndcg", &report.ndcg)] {
        for (k, v) in report.ks.iter().zip(values) {
            writeln!(out, "{name},{k},{v:.10},{},{}", report.n_users, report.config_hash).unwrap();
        }
    }
    fs::write(path, out)?;
    Ok(())
}
