use crate::backend::EmbeddingTable;
use crate::data::Triplet;
use crate::diffusion::{forward_to_t, forward_with_noise, DenoiserParams, MlpCache, NoiseSchedule, Role};
use crate::error::Result;
use crate::numerics::Rng;
use crate::scalar::{dot, Scalar};

/// Mixing of the ranking and reconstruction terms and the sharpness of the
/// confidence weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    /// Share of the BPR term, in (0, 1).
    pub lambda: f64,
    /// Exponent of the confidence weight `σ(û·î)^γ`.
    pub gamma: f64,
    /// With `false` every instance gets weight 1 regardless of `gamma`.
    pub reweight: bool,
}

/// One training instance with its diffusion step and forward noise fixed.
#[derive(Clone, Debug)]
pub struct Instance<S> {
    pub e_u: Vec<S>,
    pub e_i: Vec<S>,
    pub e_j: Vec<S>,
    pub t: usize,
    pub noise_u: Vec<S>,
    pub noise_i: Vec<S>,
}

impl<S: Scalar> Instance<S> {
    /// Looks up the frozen embeddings of `triplet`, draws `t ~ U{1..T}` and
    /// independent forward noise for the user and item sides.
    pub fn draw(tables: &EmbeddingTable<S>, triplet: Triplet, schedule: &NoiseSchedule<S>, rng: &mut Rng) -> Self {
        let d = tables.dim();
        let t = rng.int_inclusive(1, schedule.steps() as i64) as usize;
        let mut noise_u = vec![S::zero(); d];
        let mut noise_i = vec![S::zero(); d];
        rng.fill_normal(&mut noise_u);
        rng.fill_normal(&mut noise_i);
        Self {
            e_u: tables.user(triplet.user).to_vec(),
            e_i: tables.item(triplet.positive).to_vec(),
            e_j: tables.item(triplet.negative).to_vec(),
            t,
            noise_u,
            noise_i,
        }
    }
}

/// Loss components of one instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossTerms<S> {
    pub l_re: S,
    pub l_bpr: S,
    pub weight: S,
    pub total: S,
}

/// `(‖e_u − f_θ(e_t^u, e_i, t)‖² + ‖e_i − f_ψ(e_t^i, e_u, t)‖²) / 2` with
/// fresh forward noise.
pub fn reconstruction_loss<S: Scalar>(
    user: usize,
    item: usize,
    t: usize,
    tables: &EmbeddingTable<S>,
    schedule: &NoiseSchedule<S>,
    params: &DenoiserParams<S>,
    rng: &mut Rng,
) -> Result<S> {
    let (eu, ei) = (tables.user(user), tables.item(item));
    let xu = forward_to_t(eu, t, schedule, Role::User, rng)?;
    let xi = forward_to_t(ei, t, schedule, Role::Item, rng)?;
    let u_hat = params.reconstruct(Role::User, &xu.vector, ei, t)?;
    let i_hat = params.reconstruct(Role::Item, &xi.vector, eu, t)?;
    Ok((sq_dist(eu, &u_hat) + sq_dist(ei, &i_hat)) * S::of(0.5))
}

fn sq_dist<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn confidence<S: Scalar>(score: S, w: &LossWeights) -> S {
    if !w.reweight || w.gamma == 0.0 {
        S::one()
    } else {
        score.sigmoid().powf(S::of(w.gamma))
    }
}

struct Forward<S> {
    u_hat: Vec<S>,
    i_hat: Vec<S>,
}

fn forward<S: Scalar>(
    inst: &Instance<S>,
    params: &DenoiserParams<S>,
    schedule: &NoiseSchedule<S>,
    caches: Option<(&mut MlpCache<S>, &mut MlpCache<S>)>,
) -> Result<Forward<S>> {
    let xu = forward_with_noise(&inst.e_u, inst.t, schedule, Role::User, &inst.noise_u)?;
    let xi = forward_with_noise(&inst.e_i, inst.t, schedule, Role::Item, &inst.noise_i)?;
    let input_u = params.input(&xu.vector, &inst.e_i, inst.t)?;
    let input_i = params.input(&xi.vector, &inst.e_u, inst.t)?;
    let (u_hat, i_hat) = match caches {
        Some((cu, ci)) => (params.user.forward_cached(&input_u, cu), params.item.forward_cached(&input_i, ci)),
        None => (params.user.forward(&input_u), params.item.forward(&input_i)),
    };
    Ok(Forward { u_hat, i_hat })
}

fn terms<S: Scalar>(inst: &Instance<S>, f: &Forward<S>, w: &LossWeights, fixed_weight: Option<S>) -> (LossTerms<S>, S) {
    let l_re = (sq_dist(&inst.e_u, &f.u_hat) + sq_dist(&inst.e_i, &f.i_hat)) * S::of(0.5);
    let margin = dot(&f.u_hat, &f.i_hat) - dot(&f.u_hat, &inst.e_j);
    let l_bpr = -margin.log_sigmoid();
    let weight = fixed_weight.unwrap_or_else(|| confidence(dot(&f.u_hat, &f.i_hat), w));
    let lambda = S::of(w.lambda);
    let total = weight * (lambda * l_bpr + (S::one() - lambda) * l_re);
    (LossTerms { l_re, l_bpr, weight, total }, margin)
}

/// `w·[λ·L_bpr(û, î, e_j) + (1 − λ)·L_re]`. `fixed_weight` replaces `w`
/// (finite-difference checks hold it constant, as training does).
pub fn combined_loss<S: Scalar>(
    inst: &Instance<S>,
    params: &DenoiserParams<S>,
    schedule: &NoiseSchedule<S>,
    weights: &LossWeights,
    fixed_weight: Option<S>,
) -> Result<LossTerms<S>> {
    let f = forward(inst, params, schedule, None)?;
    Ok(terms(inst, &f, weights, fixed_weight).0)
}

/// Work buffers reused across instances.
#[derive(Default)]
pub struct GradWorkspace<S> {
    cache_u: MlpCache<S>,
    cache_i: MlpCache<S>,
}

/// Adds `scale · ∂L/∂(θ, ψ)` into `grads`, with `w` held constant.
pub fn combined_loss_grad<S: Scalar>(
    inst: &Instance<S>,
    params: &DenoiserParams<S>,
    schedule: &NoiseSchedule<S>,
    weights: &LossWeights,
    scale: S,
    grads: &mut DenoiserParams<S>,
    ws: &mut GradWorkspace<S>,
) -> Result<LossTerms<S>> {
    let f = forward(inst, params, schedule, Some((&mut ws.cache_u, &mut ws.cache_i)))?;
    let (lt, margin) = terms(inst, &f, weights, None);
    let lambda = S::of(weights.lambda);
    let k = scale * lt.weight;
    // d(−ln σ(m))/dm = −σ(−m)
    let gm = -(-margin).sigmoid() * lambda;
    let re = S::one() - lambda;
    let g_u: Vec<S> = (0..f.u_hat.len())
        .map(|c| k * (gm * (f.i_hat[c] - inst.e_j[c]) + re * (f.u_hat[c] - inst.e_u[c])))
        .collect();
    let g_i: Vec<S> = (0..f.i_hat.len())
        .map(|c| k * (gm * f.u_hat[c] + re * (f.i_hat[c] - inst.e_i[c])))
        .collect();
    params.user.backward(&ws.cache_u, &g_u, &mut grads.user);
    params.item.backward(&ws.cache_i, &g_i, &mut grads.item);
    Ok(lt)
}
