//! Joint optimization of the user and item reconstruction networks.

mod loss;
mod trainer;

pub use loss::{combined_loss, combined_loss_grad, reconstruction_loss, GradWorkspace, Instance, LossTerms, LossWeights};
pub use trainer::{train, validation_recall, write_training_log, StopReason, TrainConfig, TrainStepRecord, Trained};
