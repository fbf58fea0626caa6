//! Noise schedules, the forward and reverse diffusion processes and the
//! conditional reconstruction networks.

//! Noise schedules, closed-form forward noising, posterior reverse steps and
//! the conditioned reconstruction MLPs.

mod checkpoint;
mod denoiser;
mod process;
mod schedule;
mod step_encoding;

pub use checkpoint::{read_denoiser, write_denoiser, DENOISER_MAGIC};
pub use denoiser::{DenoiserConfig, DenoiserParams, Linear, Mlp, MlpCache, Role};
pub use process::{forward_step, forward_to_t, forward_with_noise, reverse_step, DiffusionState};
pub use schedule::{NoiseSchedule, ScheduleConfig, ScheduleKind, MIN_ALPHA_BAR};
pub use step_encoding::encode_step;
