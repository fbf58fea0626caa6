//! LightGCN-style propagation over the user–item training graph.

use super::EmbeddingTable;
use crate::data::InteractionDataset;
use crate::error::{dim_mismatch, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

/// Symmetric-normalized bipartite adjacency `D^{-1/2} A D^{-1/2}` over
/// `num_users + num_items` nodes (users first). Isolated nodes carry a unit
/// self-loop so they keep their own embedding at every layer.
#[derive(Clone, Debug)]
pub struct LightGraph {
    num_users: usize,
    num_items: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
}

impl LightGraph {
    pub fn from_dataset(ds: &InteractionDataset) -> Self {
        let n = ds.num_users + ds.num_items;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for u in 0..ds.num_users {
            for &i in ds.train_items(u) {
                adj[u].push(ds.num_users + i);
                adj[ds.num_users + i].push(u);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        let degree: Vec<f64> = adj.iter().map(|a| a.len() as f64).collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for (v, a) in adj.iter().enumerate() {
            if a.is_empty() {
                neighbors.push(v);
                weights.push(1.0);
            } else {
                for &w in a {
                    neighbors.push(w);
                    weights.push(1.0 / (degree[v] * degree[w]).sqrt());
                }
            }
            offsets.push(neighbors.len());
        }
        Self {
            num_users: ds.num_users,
            num_items: ds.num_items,
            offsets,
            neighbors,
            weights,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_users + self.num_items
    }

    /// One application of the normalized adjacency to a node × dim matrix.
    pub fn step<S: Scalar>(&self, x: &DenseMatrix<S>) -> DenseMatrix<S> {
        let mut out = DenseMatrix::zeros(x.rows(), x.cols());
        for v in 0..self.num_nodes() {
            let row = out.row_mut(v);
            for k in self.offsets[v]..self.offsets[v + 1] {
                let w = S::of(self.weights[k]);
                for (o, &s) in row.iter_mut().zip(x.row(self.neighbors[k])) {
                    *o += w * s;
                }
            }
        }
        out
    }

    /// Layers `0..=layers` of the propagation.
    pub fn layers<S: Scalar>(&self, x0: &DenseMatrix<S>, layers: usize) -> Vec<DenseMatrix<S>> {
        let mut out = vec![x0.clone()];
        for _ in 0..layers {
            let next = self.step(out.last().unwrap());
            out.push(next);
        }
        out
    }

    /// Mean of layers `0..=layers`. The operator is symmetric, so this also
    /// maps output gradients back to layer-0 gradients.
    pub fn mean_propagate<S: Scalar>(&self, x0: &DenseMatrix<S>, layers: usize) -> DenseMatrix<S> {
        let all = self.layers(x0, layers);
        let mut acc = DenseMatrix::zeros(x0.rows(), x0.cols());
        for l in &all {
            acc.axpy(S::one(), l).expect("layers share a shape");
        }
        acc.scale(S::one() / S::of(all.len() as f64))
    }

    pub(crate) fn stack<S: Scalar>(&self, table: &EmbeddingTable<S>) -> Result<DenseMatrix<S>> {
        if table.num_users() != self.num_users || table.num_items() != self.num_items {
            return Err(dim_mismatch(
                "LightGraph",
                format!("{}+{} nodes", self.num_users, self.num_items),
                format!("{}+{}", table.num_users(), table.num_items()),
            ));
        }
        let mut data = table.users().as_slice().to_vec();
        data.extend_from_slice(table.items().as_slice());
        DenseMatrix::from_vec(self.num_nodes(), table.dim(), data)
    }

    pub(crate) fn unstack<S: Scalar>(&self, x: DenseMatrix<S>) -> Result<EmbeddingTable<S>> {
        let dim = x.cols();
        let mut data = x.into_vec();
        let items = data.split_off(self.num_users * dim);
        EmbeddingTable::new(
            DenseMatrix::from_vec(self.num_users, dim, data)?,
            DenseMatrix::from_vec(self.num_items, dim, items)?,
        )
    }
}

/// Final embeddings as the mean over propagation layers `0..=layers`.
pub fn propagate_light_graph<S: Scalar>(
    table: &EmbeddingTable<S>,
    ds: &InteractionDataset,
    layers: usize,
) -> Result<EmbeddingTable<S>> {
    let graph = LightGraph::from_dataset(ds);
    let x = graph.stack(table)?;
    graph.unstack(graph.mean_propagate(&x, layers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{chronological_split, Interaction, InteractionLog, SplitRatios};
    use crate::numerics::Rng;

    fn train_graph(pairs: &[(usize, usize)], users: usize, items: usize) -> InteractionDataset {
        let log = InteractionLog {
            num_users: users,
            num_items: items,
            user_ids: (0..users as u64).collect(),
            item_ids: (0..items as u64).collect(),
            interactions: pairs
                .iter()
                .enumerate()
                .map(|(k, &(user, item))| Interaction { user, item, rating: 5.0, timestamp: k as i64 })
                .collect(),
        };
        chronological_split(&log, SplitRatios { train: 1.0, valid: 0.0, test: 0.0 }).unwrap()
    }

    fn random_table(users: usize, items: usize, dim: usize, seed: u64) -> EmbeddingTable<f64> {
        let mut rng = Rng::new(seed);
        EmbeddingTable::new(
            DenseMatrix::from_fn(users, dim, |_, _| rng.uniform(-1.0, 1.0)),
            DenseMatrix::from_fn(items, dim, |_, _| rng.uniform(-1.0, 1.0)),
        )
        .unwrap()
    }

    #[test]
    fn zero_layers_is_identity() {
        let ds = train_graph(&[(0, 0), (1, 1), (1, 0)], 2, 2);
        let t = random_table(2, 2, 3, 1);
        assert_eq!(propagate_light_graph(&t, &ds, 0).unwrap(), t);
    }

    #[test]
    fn single_edge_swaps_embeddings() {
        let ds = train_graph(&[(0, 0)], 1, 1);
        let t = EmbeddingTable::new(
            DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap(),
            DenseMatrix::from_rows(&[vec![0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let g = LightGraph::from_dataset(&ds);
        let layers = g.layers(&g.stack(&t).unwrap(), 1);
        assert_eq!(layers[1].row(0), t.item(0));
        assert_eq!(layers[1].row(1), t.user(0));
    }

    #[test]
    fn isolated_node_keeps_its_embedding() {
        // item 2 has no training edge
        let ds = train_graph(&[(0, 0), (0, 1), (1, 1)], 2, 3);
        let t = random_table(2, 3, 4, 2);
        let p = propagate_light_graph(&t, &ds, 3).unwrap();
        assert_eq!(p.item(2), t.item(2));
        assert_eq!(p.dim(), 4);
        assert!(p.is_finite());
    }

    #[test]
    fn matches_dense_adjacency_reference() {
        // 2 users, 2 items; edges u0-i0, u0-i1, u1-i1
        let ds = train_graph(&[(0, 0), (0, 1), (1, 1)], 2, 2);
        let t = random_table(2, 2, 3, 3);
        let mut a = DenseMatrix::<f64>::zeros(4, 4);
        for &(u, i) in &[(0usize, 0usize), (0, 1), (1, 1)] {
            a[(u, 2 + i)] = 1.0;
            a[(2 + i, u)] = 1.0;
        }
        let deg: Vec<f64> = (0..4).map(|r| a.row(r).iter().sum()).collect();
        let norm = DenseMatrix::from_fn(4, 4, |r, c| a[(r, c)] / (deg[r] * deg[c]).sqrt());
        let g = LightGraph::from_dataset(&ds);
        let x0 = g.stack(&t).unwrap();
        let x1 = norm.matmul(&x0).unwrap();
        let x2 = norm.matmul(&x1).unwrap();
        let expected = x0.add(&x1).unwrap().add(&x2).unwrap().scale(1.0 / 3.0);
        let got = g.stack(&propagate_light_graph(&t, &ds, 2).unwrap()).unwrap();
        assert!(got.max_abs_diff(&expected) < 1e-14);
    }
}
