use super::denoiser::Role;
use super::schedule::NoiseSchedule;
use crate::error::{dim_mismatch, Error, Result};
use crate::numerics::Rng;
use crate::scalar::Scalar;

/// An embedding at diffusion step `step`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionState<S> {
    pub vector: Vec<S>,
    pub step: usize,
    pub role: Role,
}

fn check_step<S: Scalar>(t: usize, schedule: &NoiseSchedule<S>, lo: usize) -> Result<()> {
    if t < lo || t > schedule.steps() {
        return Err(Error::Contract(format!(
            "step {t} outside {lo}..={}",
            schedule.steps()
        )));
    }
    Ok(())
}

/// `√ᾱ_t·x0 + √(1−ᾱ_t)·noise` for caller-supplied noise.
pub fn forward_with_noise<S: Scalar>(
    x0: &[S],
    t: usize,
    schedule: &NoiseSchedule<S>,
    role: Role,
    noise: &[S],
) -> Result<DiffusionState<S>> {
    check_step(t, schedule, 1)?;
    if noise.len() != x0.len() {
        return Err(dim_mismatch("forward noise", x0.len(), noise.len()));
    }
    let a = schedule.alpha_bar(t).sqrt();
    let b = schedule.one_minus_alpha_bar(t).sqrt();
    Ok(DiffusionState {
        vector: x0.iter().zip(noise).map(|(&x, &e)| a * x + b * e).collect(),
        step: t,
        role,
    })
}

/// Samples `q(x_t | x_0)` in closed form.
pub fn forward_to_t<S: Scalar>(
    x0: &[S],
    t: usize,
    schedule: &NoiseSchedule<S>,
    role: Role,
    rng: &mut Rng,
) -> Result<DiffusionState<S>> {
    check_step(t, schedule, 1)?;
    let mut noise = vec![S::zero(); x0.len()];
    rng.fill_normal(&mut noise);
    forward_with_noise(x0, t, schedule, role, &noise)
}

/// One transition `q(x_{t+1} | x_t) = 𝒩(√α_{t+1}·x_t, β_{t+1}·I)`.
pub fn forward_step<S: Scalar>(
    state: &DiffusionState<S>,
    schedule: &NoiseSchedule<S>,
    rng: &mut Rng,
) -> Result<DiffusionState<S>> {
    let t = state.step + 1;
    check_step(t, schedule, 1)?;
    let a = schedule.alpha(t).sqrt();
    let b = schedule.beta(t).sqrt();
    let mut noise = vec![S::zero(); state.vector.len()];
    rng.fill_normal(&mut noise);
    Ok(DiffusionState {
        vector: state.vector.iter().zip(&noise).map(|(&x, &e)| a * x + b * e).collect(),
        step: t,
        role: state.role,
    })
}

/// Posterior mean step from `t` to `t − 1`, plus `√β̃_t·ε` when `stochastic`
/// and `t > 1`.
pub fn reverse_step<S: Scalar>(
    state: &DiffusionState<S>,
    tilde_e0: &[S],
    schedule: &NoiseSchedule<S>,
    rng: &mut Rng,
    stochastic: bool,
) -> Result<DiffusionState<S>> {
    let t = state.step;
    check_step(t, schedule, 1)?;
    if tilde_e0.len() != state.vector.len() {
        return Err(dim_mismatch("reverse step", state.vector.len(), tilde_e0.len()));
    }
    let (ct, c0) = schedule.posterior_coefficients(t);
    let mut vector: Vec<S> = state
        .vector
        .iter()
        .zip(tilde_e0)
        .map(|(&x, &e)| ct * x + c0 * e)
        .collect();
    if stochastic && t > 1 {
        let sd = schedule.posterior_variance(t).sqrt();
        let mut noise = vec![S::zero(); vector.len()];
        rng.fill_normal(&mut noise);
        for (v, e) in vector.iter_mut().zip(noise) {
            *v += sd * e;
        }
    }
    Ok(DiffusionState {
        vector,
        step: t - 1,
        role: state.role,
    })
}
