//! BPR matrix factorization, optionally trained through light-graph
//! propagation.

use super::{EmbeddingTable, LightGraph};
use crate::data::{sample_triplet, InteractionDataset, Triplet};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Rng};
use crate::scalar::{dot, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendKind {
    MfBpr,
    LightGraph,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::MfBpr => "mf_bpr",
            BackendKind::LightGraph => "light_graph",
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mf_bpr" => Ok(BackendKind::MfBpr),
            "light_graph" => Ok(BackendKind::LightGraph),
            other => Err(Error::Contract(format!("unknown backend `{other}`"))),
        }
    }
}

/// Backend pretraining hyper-parameters. Defaults are desk-scale choices.
#[derive(Clone, Debug, PartialEq)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub dim: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Propagation depth, light-graph backend only.
    pub layers: usize,
    pub init_std: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::MfBpr,
            dim: 64,
            learning_rate: 0.05,
            l2: 1e-4,
            epochs: 30,
            batch_size: 256,
            layers: 2,
            init_std: 0.1,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Contract("backend learning rate must be positive".into()));
        }
        if self.dim == 0 || self.batch_size == 0 {
            return Err(Error::Contract("backend dim and batch size must be positive".into()));
        }
        if self.kind == BackendKind::LightGraph && self.layers == 0 {
            return Err(Error::Contract("light_graph backend needs at least one layer".into()));
        }
        if self.l2 < 0.0 {
            return Err(Error::Contract("l2 weight must be non-negative".into()));
        }
        Ok(())
    }
}

/// `−ln σ(e_u·e_i − e_u·e_j)`.
pub fn bpr_loss<S: Scalar>(user: &[S], pos: &[S], neg: &[S]) -> S {
    -(dot(user, pos) - dot(user, neg)).log_sigmoid()
}

#[derive(Clone, Debug)]
pub struct Pretrained<S> {
    /// Final (propagated, for the graph backend) embeddings.
    pub table: EmbeddingTable<S>,
    /// Mean per-triplet loss of every epoch.
    pub losses: Vec<f64>,
}

/// I.i.d. `N(0, std²)` initialization: all user rows, then all item rows.
pub fn init_table<S: Scalar>(users: usize, items: usize, dim: usize, std: f64, rng: &mut Rng) -> EmbeddingTable<S> {
    let mut draw = |rows| DenseMatrix::from_fn(rows, dim, |_, _| S::of(std * rng.standard_normal()));
    let u = draw(users);
    let i = draw(items);
    EmbeddingTable::new(u, i).expect("shapes agree by construction")
}

/// Sparse gradient accumulator over the rows of one matrix.
struct RowGrads<S> {
    grads: DenseMatrix<S>,
    touched: Vec<usize>,
    mark: Vec<bool>,
}

impl<S: Scalar> RowGrads<S> {
    fn new(rows: usize, dim: usize) -> Self {
        Self {
            grads: DenseMatrix::zeros(rows, dim),
            touched: Vec::new(),
            mark: vec![false; rows],
        }
    }

    fn add(&mut self, row: usize, k: S, v: &[S]) {
        if !self.mark[row] {
            self.mark[row] = true;
            self.touched.push(row);
        }
        for (g, &x) in self.grads.row_mut(row).iter_mut().zip(v) {
            *g += k * x;
        }
    }

    fn reset(&mut self) {
        for &r in &self.touched {
            self.grads.row_mut(r).iter_mut().for_each(|g| *g = S::zero());
            self.mark[r] = false;
        }
        self.touched.clear();
    }

    /// `params[row] -= lr·grad[row]` for touched rows, then reset.
    fn apply(&mut self, params: &mut DenseMatrix<S>, lr: S) {
        for &r in &self.touched {
            let g = self.grads.row(r).to_vec();
            for (p, gv) in params.row_mut(r).iter_mut().zip(g) {
                *p -= lr * gv;
            }
            self.grads.row_mut(r).iter_mut().for_each(|g| *g = S::zero());
            self.mark[r] = false;
        }
        self.touched.clear();
    }
}

/// Accumulates the BPR + L2 gradient of one triplet against `scoring`
/// embeddings into `gu`/`gi`; L2 acts on `base` (layer-0) rows. Returns the
/// triplet loss.
fn accumulate<S: Scalar>(
    t: Triplet,
    scoring: &EmbeddingTable<S>,
    base: &EmbeddingTable<S>,
    l2: S,
    gu: &mut RowGrads<S>,
    gi: &mut RowGrads<S>,
    reg: (&mut RowGrads<S>, &mut RowGrads<S>),
) -> S {
    let (eu, ei, ej) = (scoring.user(t.user), scoring.item(t.positive), scoring.item(t.negative));
    let margin = dot(eu, ei) - dot(eu, ej);
    // d(−ln σ(m))/dm = −σ(−m)
    let g = -(-margin).sigmoid();
    let diff: Vec<S> = ei.iter().zip(ej).map(|(&a, &b)| a - b).collect();
    gu.add(t.user, g, &diff);
    gi.add(t.positive, g, eu);
    gi.add(t.negative, -g, eu);

    let half = S::of(0.5);
    let (bu, bi, bj) = (base.user(t.user), base.item(t.positive), base.item(t.negative));
    reg.0.add(t.user, l2, bu);
    reg.1.add(t.positive, l2, bi);
    reg.1.add(t.negative, l2, bj);
    let sq = |v: &[S]| dot(v, v);
    -margin.log_sigmoid() + half * l2 * (sq(bu) + sq(bi) + sq(bj))
}

/// Mini-batch SGD on BPR + L2 with gradients summed over each batch. Every
/// epoch draws `|train|` triplets.
pub fn pretrain<S: Scalar>(ds: &InteractionDataset, cfg: &BackendConfig, rng: &mut Rng) -> Result<Pretrained<S>> {
    cfg.validate()?;
    let mut init_rng = rng.derive("backend-init");
    let mut table = init_table::<S>(ds.num_users, ds.num_items, cfg.dim, cfg.init_std, &mut init_rng);
    let graph = match cfg.kind {
        BackendKind::LightGraph => Some(LightGraph::from_dataset(ds)),
        BackendKind::MfBpr => None,
    };
    let mut sample_rng = rng.derive("backend-triplets");
    let lr = S::of(cfg.learning_rate);
    let l2 = S::of(cfg.l2);
    let per_epoch = ds.train().len();
    let mut losses = Vec::with_capacity(cfg.epochs);

    let mut gu = RowGrads::new(ds.num_users, cfg.dim);
    let mut gi = RowGrads::new(ds.num_items, cfg.dim);
    let mut ru = RowGrads::new(ds.num_users, cfg.dim);
    let mut ri = RowGrads::new(ds.num_items, cfg.dim);

    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        let mut done = 0;
        while done < per_epoch {
            let batch = cfg.batch_size.min(per_epoch - done);
            let triplets = (0..batch)
                .map(|_| sample_triplet(ds, &mut sample_rng))
                .collect::<Result<Vec<_>>>()?;
            match &graph {
                None => {
                    for &t in &triplets {
                        total += accumulate(t, &table, &table, l2, &mut gu, &mut gi, (&mut ru, &mut ri)).as_f64();
                    }
                    let (users, items) = table.parts_mut();
                    gu.apply(users, lr);
                    gi.apply(items, lr);
                    ru.apply(users, lr);
                    ri.apply(items, lr);
                }
                Some(g) => {
                    let stacked = g.stack(&table)?;
                    let scoring = g.unstack(g.mean_propagate(&stacked, cfg.layers))?;
                    for &t in &triplets {
                        total += accumulate(t, &scoring, &table, l2, &mut gu, &mut gi, (&mut ru, &mut ri)).as_f64();
                    }
                    // Back through the symmetric propagation operator.
                    let mut out_grad = DenseMatrix::zeros(g.num_nodes(), cfg.dim);
                    for &r in &gu.touched {
                        out_grad.row_mut(r).copy_from_slice(gu.grads.row(r));
                    }
                    for &r in &gi.touched {
                        out_grad.row_mut(ds.num_users + r).copy_from_slice(gi.grads.row(r));
                    }
                    let base_grad = g.mean_propagate(&out_grad, cfg.layers);
                    let mut stacked = stacked;
                    stacked.axpy(-lr, &base_grad)?;
                    table = g.unstack(stacked)?;
                    let (users, items) = table.parts_mut();
                    gu.reset();
                    gi.reset();
                    ru.apply(users, lr);
                    ri.apply(items, lr);
                }
            }
            done += batch;
        }
        let mean = total / per_epoch.max(1) as f64;
        if !mean.is_finite() || !table.is_finite() {
            return Err(Error::Diverged { epoch, what: "backend loss" });
        }
        log::debug!("backend epoch {epoch}: loss {mean:.5}");
        losses.push(mean);
    }

    let table = match &graph {
        Some(g) => g.unstack(g.mean_propagate(&g.stack(&table)?, cfg.layers))?,
        None => table,
    };
    Ok(Pretrained { table, losses })
}
