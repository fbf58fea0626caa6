use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use super::loss::{combined_loss_grad, GradWorkspace, Instance, LossWeights};
use crate::backend::EmbeddingTable;
use crate::data::{sample_triplet, InteractionDataset, Split};
use crate::diffusion::{DenoiserConfig, DenoiserParams, NoiseSchedule, ScheduleConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, DdrmScorer};
use crate::inference::InferenceConfig;
use crate::numerics::Rng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub reweight: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without a validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub schedule: ScheduleConfig,
    /// Hidden width of both networks; `None` uses the embedding dimension.
    pub hidden: Option<usize>,
    pub hidden_layers: usize,
    /// Inference settings for the per-epoch validation pass.
    pub validation: InferenceConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            gamma: 0.1,
            reweight: true,
            learning_rate: 0.05,
            batch_size: 64,
            epochs: 30,
            patience: 5,
            schedule: ScheduleConfig::default(),
            hidden: None,
            hidden_layers: 1,
            validation: InferenceConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda: self.lambda,
            gamma: self.gamma,
            reweight: self.reweight,
        }
    }

    pub fn denoiser(&self, dim: usize) -> DenoiserConfig {
        DenoiserConfig {
            dim,
            hidden: self.hidden.unwrap_or(dim),
            hidden_layers: self.hidden_layers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::Contract(format!("lambda must lie in (0, 1), got {}", self.lambda)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Contract(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(Error::Contract("learning rate and batch size must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainStepRecord {
    pub epoch: usize,
    pub l_re: f64,
    pub l_bpr: f64,
    pub mean_w: f64,
    pub recall20_valid: f64,
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Completed,
    EarlyStopped,
    /// A non-finite loss or parameter appeared in this epoch; the returned
    /// parameters are the last good ones.
    Diverged { epoch: usize },
}

#[derive(Clone, Debug)]
pub struct Trained<S> {
    /// Parameters of the best validation epoch (the initialization when no
    /// epoch ran).
    pub params: DenoiserParams<S>,
    pub records: Vec<TrainStepRecord>,
    pub best_epoch: Option<usize>,
    pub stop: StopReason,
}

/// Validation Recall@20 of the current parameters, with a fixed inference
/// stream so epochs are compared on the same noise.
pub fn validation_recall<S: Scalar>(
    ds: &InteractionDataset,
    tables: &EmbeddingTable<S>,
    params: &DenoiserParams<S>,
    schedule: &NoiseSchedule<S>,
    cfg: &InferenceConfig,
    rng: &Rng,
) -> Result<f64> {
    let scorer = DdrmScorer {
        ds,
        tables,
        params,
        schedule,
        config: *cfg,
    };
    Ok(evaluate(&scorer, ds, Split::Valid, &[20], rng)?.recall[0])
}

/// Mini-batch SGD on the user and item networks; the embeddings stay frozen.
/// Each epoch draws `|train|` triplets, and training stops early once
/// validation Recall@20 has not improved for `patience` epochs.
pub fn train<S: Scalar>(
    ds: &InteractionDataset,
    tables: &EmbeddingTable<S>,
    cfg: &TrainConfig,
    rng: &Rng,
) -> Result<Trained<S>> {
    cfg.validate()?;
    if tables.num_users() != ds.num_users || tables.num_items() != ds.num_items {
        return Err(Error::Contract(format!(
            "embeddings cover {}×{} users×items, dataset has {}×{}",
            tables.num_users(),
            tables.num_items(),
            ds.num_users,
            ds.num_items
        )));
    }
    let schedule: NoiseSchedule<S> = cfg.schedule.build()?;
    let mut params = DenoiserParams::init(cfg.denoiser(tables.dim()), &mut rng.derive("denoiser-init"))?;
    let mut grads = DenoiserParams::zeros(params.config)?;
    let mut ws = GradWorkspace::default();
    let mut sample_rng = rng.derive("denoiser-triplets");
    let valid_rng = rng.derive("validation-inference");
    let weights = cfg.weights();
    let lr = S::of(cfg.learning_rate);
    let per_epoch = ds.train().len();

    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, DenoiserParams<S>)> = None;
    let mut since_best = 0;
    let mut stop = StopReason::Completed;

    'epochs: for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let snapshot = params.clone();
        let (mut sum_re, mut sum_bpr, mut sum_w) = (0.0, 0.0, 0.0);
        let mut done = 0;
        while done < per_epoch {
            let n = cfg.batch_size.min(per_epoch - done);
            let scale = S::one() / S::of(n as f64);
            for _ in 0..n {
                let triplet = sample_triplet(ds, &mut sample_rng)?;
                let inst = Instance::draw(tables, triplet, &schedule, &mut sample_rng);
                let lt = combined_loss_grad(&inst, &params, &schedule, &weights, scale, &mut grads, &mut ws)?;
                sum_re += lt.l_re.as_f64();
                sum_bpr += lt.l_bpr.as_f64();
                sum_w += lt.weight.as_f64();
            }
            params.axpy(-lr, &grads);
            grads.user.fill_zero();
            grads.item.fill_zero();
            done += n;
        }
        if !(sum_re.is_finite() && sum_bpr.is_finite()) || !params.is_finite() {
            log::warn!("non-finite loss in epoch {epoch}; keeping the last good parameters");
            if best.is_none() {
                params = snapshot;
            }
            stop = StopReason::Diverged { epoch };
            break 'epochs;
        }
        let recall = validation_recall(ds, tables, &params, &schedule, &cfg.validation, &valid_rng)?;
        let denom = per_epoch.max(1) as f64;
        let rec = TrainStepRecord {
            epoch,
            l_re: sum_re / denom,
            l_bpr: sum_bpr / denom,
            mean_w: sum_w / denom,
            recall20_valid: recall,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: l_re {:.6} l_bpr {:.6} w {:.4} recall@20 {:.4}",
            rec.l_re,
            rec.l_bpr,
            rec.mean_w,
            rec.recall20_valid
        );
        records.push(rec);
        let improved = match &best {
            None => true,
            Some((r, _, _)) => recall > *r,
        };
        if improved && !recall.is_nan() {
            best = Some((recall, epoch, params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                stop = StopReason::EarlyStopped;
                break;
            }
        }
    }

    let (params, best_epoch) = match best {
        Some((_, e, p)) => (p, Some(e)),
        None => (params, None),
    };
    Ok(Trained {
        params,
        records,
        best_epoch,
        stop,
    })
}

/// `epoch,l_re,l_bpr,mean_w,recall20_valid,seconds`.
pub fn write_training_log(records: &[TrainStepRecord], path: impl AsRef<Path>, header: &[String]) -> Result<()> {
    let mut out = String::new();
    for h in header {
        writeln!(out, "# {h}").unwrap();
    }
    out.push_str("epoch,l_re,l_bpr,mean_w,recall20_valid,seconds\n");
    for r in records {
        writeln!(
            out,
            "{},{:.12e},{:.12e},{:.12e},{:.10},{:.6}",
            r.epoch, r.l_re, r.l_bpr, r.mean_w, r.recall20_valid, r.seconds
        )
        .unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}
