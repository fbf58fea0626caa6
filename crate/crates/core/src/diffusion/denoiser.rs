use super::step_encoding::encode_into;
use crate::error::{dim_mismatch, Error, Result};
use crate::numerics::{DenseMatrix, Rng};
use crate::scalar::Scalar;

/// Which denoiser a computation runs through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    User,
    Item,
}

/// Affine layer `y = W x + b` with `W` stored `out × in` and `b` as `1 × out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<S> {
    pub weight: DenseMatrix<S>,
    pub bias: DenseMatrix<S>,
}

impl<S: Scalar> Linear<S> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: DenseMatrix::zeros(output, input),
            bias: DenseMatrix::zeros(1, output),
        }
    }

    fn apply(&self, x: &[S], out: &mut Vec<S>) {
        out.clear();
        let cols = self.weight.cols();
        let w = self.weight.as_slice();
        for (r, &b) in self.bias.as_slice().iter().enumerate() {
            let row = &w[r * cols..(r + 1) * cols];
            out.push(b + crate::scalar::dot(row, x));
        }
    }
}

/// Activations recorded by [`Mlp::forward_cached`] for backpropagation.
#[derive(Clone, Debug, Default)]
pub struct MlpCache<S> {
    activations: Vec<Vec<S>>,
}

/// Fully connected network: tanh after every layer except the last.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<S> {
    pub layers: Vec<Linear<S>>,
}

impl<S: Scalar> Mlp<S> {
    pub fn zeros(sizes: &[usize]) -> Self {
        Self {
            layers: sizes.windows(2).map(|w| Linear::zeros(w[0], w[1])).collect(),
        }
    }

    /// Xavier-normal weights, zero biases.
    pub fn init(sizes: &[usize], rng: &mut Rng) -> Self {
        let mut mlp = Self::zeros(sizes);
        for layer in &mut mlp.layers {
            let (out, inp) = layer.weight.shape();
            let std = (2.0 / (inp + out) as f64).sqrt();
            for w in layer.weight.as_mut_slice() {
                *w = S::of(std * rng.standard_normal());
            }
        }
        mlp
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.rows()
    }

    pub fn forward(&self, x: &[S]) -> Vec<S> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if l < last {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn forward_cached(&self, x: &[S], cache: &mut MlpCache<S>) -> Vec<S> {
        cache.activations.resize_with(self.layers.len(), Vec::new);
        cache.activations[0].clear();
        cache.activations[0].extend_from_slice(x);
        let last = self.layers.len() - 1;
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.apply(&cache.activations[l], &mut out);
            if l < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
                cache.activations[l + 1].clone_from(&out);
            }
        }
        out
    }

    /// Accumulates `∂/∂params` of `grad_out · f(x)` into `grads` and returns
    /// the gradient with respect to the input.
    pub fn backward(&self, cache: &MlpCache<S>, grad_out: &[S], grads: &mut Mlp<S>) -> Vec<S> {
        let mut g = grad_out.to_vec();
        for l in (0..self.layers.len()).rev() {
            let a = &cache.activations[l];
            let layer = &self.layers[l];
            let gl = &mut grads.layers[l];
            let cols = layer.weight.cols();
            {
                let gw = gl.weight.as_mut_slice();
                for (r, &gr) in g.iter().enumerate() {
                    if gr == S::zero() {
                        continue;
                    }
                    for (w, &av) in gw[r * cols..(r + 1) * cols].iter_mut().zip(a) {
                        *w += gr * av;
                    }
                }
            }
            for (b, &gr) in gl.bias.as_mut_slice().iter_mut().zip(&g) {
                *b += gr;
            }
            let mut gin = vec![S::zero(); cols];
            let w = layer.weight.as_slice();
            for (r, &gr) in g.iter().enumerate() {
                if gr == S::zero() {
                    continue;
                }
                for (gi, &wv) in gin.iter_mut().zip(&w[r * cols..(r + 1) * cols]) {
                    *gi += gr * wv;
                }
            }
            if l > 0 {
                // a = tanh(z) of the previous layer
                for (gi, &av) in gin.iter_mut().zip(a) {
                    *gi *= S::one() - av * av;
                }
            }
            g = gin;
        }
        g
    }

    /// `self += k · other` (same architecture).
    pub fn axpy(&mut self, k: S, other: &Mlp<S>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.axpy(k, &b.weight).expect("same architecture");
            a.bias.axpy(k, &b.bias).expect("same architecture");
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weight.as_mut_slice().iter_mut().for_each(|v| *v = S::zero());
            l.bias.as_mut_slice().iter_mut().for_each(|v| *v = S::zero());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weight.is_finite() && l.bias.is_finite())
    }

    /// Weight and bias matrices in declaration order.
    pub fn matrices(&self) -> impl Iterator<Item = &DenseMatrix<S>> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn matrices_mut(&mut self) -> impl Iterator<Item = &mut DenseMatrix<S>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn cast<T: Scalar>(&self) -> Mlp<T> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Linear {
                    weight: l.weight.cast(),
                    bias: l.bias.cast(),
                })
                .collect(),
        }
    }
}

/// Shape of the two reconstruction networks. Input is
/// `[noisy embedding ; condition ; step encoding]`, each of width `dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DenoiserConfig {
    pub dim: usize,
    pub hidden: usize,
    pub hidden_layers: usize,
}

impl DenoiserConfig {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            hidden: dim,
            hidden_layers: 1,
        }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![3 * self.dim];
        sizes.extend(std::iter::repeat_n(self.hidden, self.hidden_layers));
        sizes.push(self.dim);
        sizes
    }

    /// Number of affine layers.
    pub fn layer_count(&self) -> usize {
        self.hidden_layers + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || !self.dim.is_multiple_of(2) {
            return Err(Error::Contract(format!("denoiser dim must be even and positive, got {}", self.dim)));
        }
        if self.hidden == 0 && self.hidden_layers > 0 {
            return Err(Error::Contract("hidden width must be positive".into()));
        }
        Ok(())
    }
}

/// User (θ) and item (ψ) reconstruction networks.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserParams<S> {
    pub config: DenoiserConfig,
    pub user: Mlp<S>,
    pub item: Mlp<S>,
}

impl<S: Scalar> DenoiserParams<S> {
    pub fn init(config: DenoiserConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let sizes = config.layer_sizes();
        let user = Mlp::init(&sizes, rng);
        let item = Mlp::init(&sizes, rng);
        Ok(Self { config, user, item })
    }

    pub fn zeros(config: DenoiserConfig) -> Result<Self> {
        config.validate()?;
        let sizes = config.layer_sizes();
        Ok(Self {
            config,
            user: Mlp::zeros(&sizes),
            item: Mlp::zeros(&sizes),
        })
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn mlp(&self, role: Role) -> &Mlp<S> {
        match role {
            Role::User => &self.user,
            Role::Item => &self.item,
        }
    }

    pub fn mlp_mut(&mut self, role: Role) -> &mut Mlp<S> {
        match role {
            Role::User => &mut self.user,
            Role::Item => &mut self.item,
        }
    }

    /// `[x ; condition ; encode_step(t)]`.
    pub fn input(&self, x: &[S], condition: &[S], t: usize) -> Result<Vec<S>> {
        let d = self.dim();
        if x.len() != d {
            return Err(dim_mismatch("denoiser input", d, x.len()));
        }
        if condition.len() != d {
            return Err(dim_mismatch("denoiser condition", d, condition.len()));
        }
        let mut v = Vec::with_capacity(3 * d);
        v.extend_from_slice(x);
        v.extend_from_slice(condition);
        encode_into(t, &mut v, d);
        Ok(v)
    }

    /// Predicted clean embedding `f(x_t, condition, t)`.
    pub fn reconstruct(&self, role: Role, x: &[S], condition: &[S], t: usize) -> Result<Vec<S>> {
        let input = self.input(x, condition, t)?;
        Ok(self.mlp(role).forward(&input))
    }

    pub fn is_finite(&self) -> bool {
        self.user.is_finite() && self.item.is_finite()
    }

    pub fn axpy(&mut self, k: S, other: &DenoiserParams<S>) {
        self.user.axpy(k, &other.user);
        self.item.axpy(k, &other.item);
    }

    pub fn cast<T: Scalar>(&self) -> DenoiserParams<T> {
        DenoiserParams {
            config: self.config,
            user: self.user.cast(),
            item: self.item.cast(),
        }
    }
}
