use crate::backend::EmbeddingTable;
use crate::data::InteractionDataset;
use crate::diffusion::{forward_to_t, forward_with_noise, reverse_step, DenoiserParams, DiffusionState, NoiseSchedule, Role};
use crate::error::{Error, Result};
use crate::numerics::Rng;
use crate::scalar::Scalar;

/// Where the reverse chain starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StartMode {
    /// Noised mean of the user's liked-item embeddings.
    Average,
    /// A standard-normal draw.
    PureNoise,
}

impl StartMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StartMode::Average => "average",
            StartMode::PureNoise => "pure_noise",
        }
    }
}

impl std::str::FromStr for StartMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(StartMode::Average),
            "pure_noise" => Ok(StartMode::PureNoise),
            other => Err(Error::Contract(format!("unknown start mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InferenceConfig {
    pub start: StartMode,
    /// Add posterior noise on every reverse step but the last.
    pub stochastic: bool,
    /// Noise the averaged embedding to step T before reversing; with `false`
    /// the chain starts from `√ᾱ_T·ē`.
    pub forward_noise: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            start: StartMode::Average,
            stochastic: false,
            forward_noise: true,
        }
    }
}

/// Mean embedding of the items `user` interacted with in training.
pub fn average_liked_embedding<S: Scalar>(user: usize, ds: &InteractionDataset, tables: &EmbeddingTable<S>) -> Result<Vec<S>> {
    let liked = ds.train_items(user);
    if liked.is_empty() {
        return Err(Error::ColdUser(user));
    }
    let mut mean = vec![S::zero(); tables.dim()];
    for &i in liked {
        for (m, &v) in mean.iter_mut().zip(tables.item(i)) {
            *m += v;
        }
    }
    let n = S::of(liked.len() as f64);
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// Runs the item-side reverse chain from step T to 0, conditioned on the
/// user's embedding, and returns the generated ideal item embedding.
pub fn generate_ideal_item<S: Scalar>(
    user: usize,
    ds: &InteractionDataset,
    tables: &EmbeddingTable<S>,
    params: &DenoiserParams<S>,
    schedule: &NoiseSchedule<S>,
    cfg: &InferenceConfig,
    rng: &mut Rng,
) -> Result<Vec<S>> {
    let steps = schedule.steps();
    let d = tables.dim();
    let mut state = match cfg.start {
        StartMode::Average => {
            let mean = average_liked_embedding(user, ds, tables)?;
            if cfg.forward_noise {
                forward_to_t(&mean, steps, schedule, Role::Item, rng)?
            } else {
                forward_with_noise(&mean, steps, schedule, Role::Item, &vec![S::zero(); d])?
            }
        }
        StartMode::PureNoise => {
            let mut v = vec![S::zero(); d];
            rng.fill_normal(&mut v);
            DiffusionState {
                vector: v,
                step: steps,
                role: Role::Item,
            }
        }
    };
    let condition = tables.user(user);
    while state.step > 0 {
        let e0 = params.reconstruct(Role::Item, &state.vector, condition, state.step)?;
        state = reverse_step(&state, &e0, schedule, rng, cfg.stochastic)?;
    }
    Ok(state.vector)
}
