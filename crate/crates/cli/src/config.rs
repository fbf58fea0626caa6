use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ddrm::backend::{BackendConfig, BackendKind};
use ddrm::data::{NoiseSetting, SplitRatios};
use ddrm::diffusion::{ScheduleConfig, ScheduleKind};
use ddrm::eval::{PipelineConfig, SweepAxis};
use ddrm::inference::{InferenceConfig, StartMode};
use ddrm::training::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Flat run configuration. Every key is optional in the file; command-line
/// flags and `--set key=value` pairs override file values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Interaction TSV (`user\titem\trating\ttimestamp`).
    pub dataset: Option<PathBuf>,
    /// Split manifest; defaults to `<out>/split.tsv` once one exists.
    pub manifest: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub denoiser: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,

    pub noise: String,
    pub noise_ratio: f64,
    pub train_ratio: f64,
    pub valid_ratio: f64,
    pub test_ratio: f64,

    pub backend: String,
    pub dim: usize,
    pub backend_lr: f64,
    pub backend_l2: f64,
    pub backend_epochs: usize,
    pub backend_batch_size: usize,
    pub graph_layers: usize,
    pub init_std: f64,

    pub lambda: f64,
    pub gamma: f64,
    pub reweight: bool,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub schedule: String,
    pub steps: usize,
    pub noise_scale: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Hidden width of the denoisers; 0 means the embedding dimension.
    pub hidden: usize,
    pub hidden_layers: usize,

    pub ks: Vec<usize>,
    /// What `evaluate` scores with: ddrm, backend or oracle.
    pub model: String,
    pub start: String,
    pub stochastic: bool,
    pub forward_noise: bool,

    pub sweep_axis: String,
    pub sweep_values: Vec<f64>,
    pub sweep_seeds: Vec<u64>,
    pub timing_repeats: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let backend = BackendConfig::default();
        let train = TrainConfig::default();
        let schedule = ScheduleConfig::default();
        let split = SplitRatios::default();
        Self {
            dataset: None,
            manifest: None,
            embeddings: None,
            denoiser: None,
            out: PathBuf::from("runs/default"),
            seed: 0,
            noise: "natural".into(),
            noise_ratio: 0.2,
            train_ratio: split.train,
            valid_ratio: split.valid,
            test_ratio: split.test,
            backend: backend.kind.as_str().into(),
            dim: backend.dim,
            backend_lr: backend.learning_rate,
            backend_l2: backend.l2,
            backend_epochs: backend.epochs,
            backend_batch_size: backend.batch_size,
            graph_layers: backend.layers,
            init_std: backend.init_std,
            lambda: train.lambda,
            gamma: train.gamma,
            reweight: train.reweight,
            lr: train.learning_rate,
            batch_size: train.batch_size,
            epochs: train.epochs,
            patience: train.patience,
            schedule: schedule.kind.as_str().into(),
            steps: schedule.steps,
            noise_scale: schedule.scale,
            alpha_min: schedule.alpha_min,
            alpha_max: schedule.alpha_max,
            hidden: 0,
            hidden_layers: train.hidden_layers,
            ks: vec![10, 20],
            model: "ddrm".into(),
            start: StartMode::Average.as_str().into(),
            stochastic: false,
            forward_noise: true,
            sweep_axis: "noise_ratio".into(),
            sweep_values: vec![0.0, 0.2, 0.4, 0.6],
            sweep_seeds: vec![0],
            timing_repeats: 1,
        }
    }
}

/// Parses `key=value`; the value is read as a TOML literal and falls back to
/// a bare string.
fn parse_override(pair: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = pair
        .split_once('=')
        .with_context(|| format!("override `{pair}` is not of the form key=value"))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((key, value))
}

impl RunConfig {
    /// File values, then `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                toml::from_str::<toml::Table>(&text).with_context(|| format!("invalid config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            table.insert(k.clone(), v.clone());
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().context("invalid configuration")?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn overrides_from_pairs(pairs: &[String]) -> Result<Vec<(String, toml::Value)>> {
        pairs.iter().map(|p| parse_override(p)).collect()
    }

    fn check(&self) -> Result<()> {
        self.noise_setting()?;
        self.backend_config()?.validate()?;
        self.train_config()?.validate()?;
        self.schedule_config()?.build::<f64>()?;
        self.inference_config()?;
        if !matches!(self.model.as_str(), "ddrm" | "backend" | "oracle") {
            bail!("unknown model `{}` (expected ddrm, backend or oracle)", self.model);
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            bail!("ks must be a non-empty list of positive integers");
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, excluding the output directory.
    pub fn fingerprint(&self) -> String {
        let mut canon = self.clone();
        canon.out = PathBuf::new();
        let json = serde_json::to_string(&canon).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Comment lines written at the top of every text output.
    pub fn header(&self) -> Vec<String> {
        vec![format!("config_hash={} seed={}", self.fingerprint(), self.seed)]
    }

    pub fn split_ratios(&self) -> SplitRatios {
        SplitRatios {
            train: self.train_ratio,
            valid: self.valid_ratio,
            test: self.test_ratio,
        }
    }

    pub fn noise_setting(&self) -> Result<NoiseSetting> {
        Ok(match self.noise.as_str() {
            "clean" => NoiseSetting::Clean,
            "natural" => NoiseSetting::Natural,
            "random" => NoiseSetting::Random(self.noise_ratio),
            other => bail!("unknown noise setting `{other}` (expected clean, natural or random)"),
        })
    }

    pub fn backend_config(&self) -> Result<BackendConfig> {
        Ok(BackendConfig {
            kind: self.backend.parse::<BackendKind>()?,
            dim: self.dim,
            learning_rate: self.backend_lr,
            l2: self.backend_l2,
            epochs: self.backend_epochs,
            batch_size: self.backend_batch_size,
            layers: self.graph_layers,
            init_std: self.init_std,
        })
    }

    pub fn schedule_config(&self) -> Result<ScheduleConfig> {
        Ok(ScheduleConfig {
            steps: self.steps,
            scale: self.noise_scale,
            alpha_min: self.alpha_min,
            alpha_max: self.alpha_max,
            kind: self.schedule.parse::<ScheduleKind>()?,
        })
    }

    pub fn inference_config(&self) -> Result<InferenceConfig> {
        Ok(InferenceConfig {
            start: self.start.parse::<StartMode>()?,
            stochastic: self.stochastic,
            forward_noise: self.forward_noise,
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            lambda: self.lambda,
            gamma: self.gamma,
            reweight: self.reweight,
            learning_rate: self.lr,
            batch_size: self.batch_size,
            epochs: self.epochs,
            patience: self.patience,
            schedule: self.schedule_config()?,
            hidden: (self.hidden > 0).then_some(self.hidden),
            hidden_layers: self.hidden_layers,
            validation: self.inference_config()?,
        })
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            noise: self.noise_setting()?,
            backend: self.backend_config()?,
            train: self.train_config()?,
            inference: self.inference_config()?,
            ks: self.ks.clone(),
            timing_repeats: self.timing_repeats,
        })
    }

    pub fn sweep_axis(&self) -> Result<SweepAxis> {
        Ok(self.sweep_axis.parse()?)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest.clone().unwrap_or_else(|| self.out.join(crate::commands::MANIFEST_FILE))
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.embeddings.clone().unwrap_or_else(|| self.out.join(crate::commands::EMBEDDINGS_FILE))
    }

    pub fn denoiser_path(&self) -> PathBuf {
        self.denoiser.clone().unwrap_or_else(|| self.out.join(crate::commands::DENOISER_FILE))
    }
}
