//! Eager reverse-mode differentiation over a closed set of matrix primitives:
//! matmul, add, concat, tanh, sigmoid, log-sigmoid, squared norm and
//! scalar-weighted sums. Values are computed when a node is recorded, so a
//! builder can inspect intermediate results (e.g. to form constant weights).

use crate::error::{dim_mismatch, Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op<S> {
    Leaf,
    MatMul(Var, Var),
    Concat(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    LogSigmoid(Var),
    SquaredNorm(Var),
    WeightedSum(Vec<(S, Var)>),
}

#[derive(Debug, Default)]
pub struct Tape<S> {
    values: Vec<DenseMatrix<S>>,
    ops: Vec<Op<S>>,
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            values: Vec::new(),
            ops: Vec::new(),
        }
    }

    fn push(&mut self, value: DenseMatrix<S>, op: Op<S>) -> Var {
        self.values.push(value);
        self.ops.push(op);
        Var(self.values.len() - 1)
    }

    /// Parameter or constant input.
    pub fn leaf(&mut self, value: DenseMatrix<S>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &DenseMatrix<S> {
        &self.values[v.0]
    }

    /// Scalar value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> S {
        self.values[v.0].as_slice()[0]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.weighted_sum(&[(S::one(), a), (S::one(), b)])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.weighted_sum(&[(S::one(), a), (-S::one(), b)])
    }

    /// Stacks `a` on top of `b` (column counts must agree).
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.cols() {
            return Err(dim_mismatch("concat", va.cols(), vb.cols()));
        }
        let mut data = va.as_slice().to_vec();
        data.extend_from_slice(vb.as_slice());
        let out = DenseMatrix::from_vec(va.rows() + vb.rows(), va.cols(), data)?;
        Ok(self.push(out, Op::Concat(a, b)))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.tanh());
        self.push(out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(Scalar::sigmoid);
        self.push(out, Op::Sigmoid(a))
    }

    pub fn log_sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(Scalar::log_sigmoid);
        self.push(out, Op::LogSigmoid(a))
    }

    /// Element-wise activation selected by name.
    pub fn unary(&mut self, name: &str, a: Var) -> Result<Var> {
        match name {
            "tanh" => Ok(self.tanh(a)),
            "sigmoid" => Ok(self.sigmoid(a)),
            "log_sigmoid" => Ok(self.log_sigmoid(a)),
            other => Err(Error::Contract(format!("unsupported primitive `{other}`"))),
        }
    }

    /// `‖a‖²` as a 1×1 node.
    pub fn squared_norm(&mut self, a: Var) -> Var {
        let out = DenseMatrix::from_vec(1, 1, vec![self.value(a).squared_norm()]).unwrap();
        self.push(out, Op::SquaredNorm(a))
    }

    /// `Σ_k c_k · x_k` over equally shaped nodes.
    pub fn weighted_sum(&mut self, terms: &[(S, Var)]) -> Result<Var> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Contract("weighted_sum of zero terms".into()))?;
        let shape = self.value(first.1).shape();
        let mut out = DenseMatrix::zeros(shape.0, shape.1);
        for &(c, v) in terms {
            out.axpy(c, self.value(v))?;
        }
        Ok(self.push(out, Op::WeightedSum(terms.to_vec())))
    }

    /// Inner product of two equally shaped nodes via the polarization identity
    /// `a·b = (‖a+b‖² − ‖a−b‖²)/4`, so it stays inside the primitive set.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let plus = self.add(a, b)?;
        let minus = self.sub(a, b)?;
        let np = self.squared_norm(plus);
        let nm = self.squared_norm(minus);
        let q = S::of(0.25);
        self.weighted_sum(&[(q, np), (-q, nm)])
    }

    /// Gradients of the 1×1 node `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Vec<DenseMatrix<S>>> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::Contract("loss must be a 1x1 node".into()));
        }
        let mut grads: Vec<DenseMatrix<S>> = self
            .values
            .iter()
            .map(|v| DenseMatrix::zeros(v.rows(), v.cols()))
            .collect();
        grads[loss.0].as_mut_slice()[0] = S::one();

        for idx in (0..=loss.0).rev() {
            let g = grads[idx].clone();
            if g.as_slice().iter().all(|&x| x == S::zero()) {
                continue;
            }
            match &self.ops[idx] {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.matmul(&self.values[b.0].transpose())?;
                    let gb = self.values[a.0].transpose().matmul(&g)?;
                    grads[a.0].axpy(S::one(), &ga)?;
                    grads[b.0].axpy(S::one(), &gb)?;
                }
                Op::Concat(a, b) => {
                    let split = self.values[a.0].as_slice().len();
                    let (top, bottom) = g.as_slice().split_at(split);
                    for (d, &s) in grads[a.0].as_mut_slice().iter_mut().zip(top) {
                        *d += s;
                    }
                    for (d, &s) in grads[b.0].as_mut_slice().iter_mut().zip(bottom) {
                        *d += s;
                    }
                }
                Op::Tanh(a) => {
                    let y = &self.values[idx];
                    let local = DenseMatrix::from_fn(y.rows(), y.cols(), |r, c| {
                        g[(r, c)] * (S::one() - y[(r, c)] * y[(r, c)])
                    });
                    grads[a.0].axpy(S::one(), &local)?;
                }
                Op::Sigmoid(a) => {
                    let y = &self.values[idx];
                    let local = DenseMatrix::from_fn(y.rows(), y.cols(), |r, c| {
                        g[(r, c)] * y[(r, c)] * (S::one() - y[(r, c)])
                    });
                    grads[a.0].axpy(S::one(), &local)?;
                }
                Op::LogSigmoid(a) => {
                    let x = &self.values[a.0];
                    let local =
                        DenseMatrix::from_fn(x.rows(), x.cols(), |r, c| g[(r, c)] * (-x[(r, c)]).sigmoid());
                    grads[a.0].axpy(S::one(), &local)?;
                }
                Op::SquaredNorm(a) => {
                    let k = g.as_slice()[0] + g.as_slice()[0];
                    let x = self.values[a.0].clone();
                    grads[a.0].axpy(k, &x)?;
                }
                Op::WeightedSum(terms) => {
                    for &(c, v) in terms {
                        grads[v.0].axpy(c, &g)?;
                    }
                }
            }
        }
        Ok(grads)
    }
}

/// Records the computation produced by `loss_builder` over fresh leaves for
/// `params` and returns `∂loss/∂p` for every parameter, in order.
pub fn grad<S, F>(loss_builder: F, params: &[DenseMatrix<S>]) -> Result<Vec<DenseMatrix<S>>>
where
    S: Scalar,
    F: FnOnce(&mut Tape<S>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let loss = loss_builder(&mut tape, &vars)?;
    let all = tape.backward(loss)?;
    Ok(vars.iter().map(|v| all[v.0].clone()).collect())
}
