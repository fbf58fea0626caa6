use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use super::report::{evaluate, BackendScorer, DdrmScorer, MetricReport};
use crate::backend::{pretrain, BackendConfig, EmbeddingTable};
use crate::data::{InteractionDataset, NoiseSetting, Split};
use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};
use crate::inference::InferenceConfig;
use crate::numerics::Rng;
use crate::training::{train, TrainConfig, Trained};

/// Everything needed to go from a clean split to test metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub noise: NoiseSetting,
    pub backend: BackendConfig,
    pub train: TrainConfig,
    pub inference: InferenceConfig,
    pub ks: Vec<usize>,
    /// Repetitions of the timed inference pass; the minimum is reported.
    pub timing_repeats: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            noise: NoiseSetting::Natural,
            backend: BackendConfig::default(),
            train: TrainConfig::default(),
            inference: InferenceConfig::default(),
            ks: vec![10, 20],
            timing_repeats: 1,
        }
    }
}

pub struct PipelineOutcome {
    pub dataset: InteractionDataset,
    pub tables: EmbeddingTable<f64>,
    pub trained: Trained<f64>,
    pub backend: MetricReport,
    pub ddrm: MetricReport,
    pub train_seconds: f64,
    pub inference_seconds: f64,
}

/// Noise injection, backend pretraining, denoiser training and test
/// evaluation of both the backend and the denoised pipeline, all seeded
/// from `seed`.
pub fn run_pipeline(clean: &InteractionDataset, cfg: &PipelineConfig, seed: u64) -> Result<PipelineOutcome> {
    let root = Rng::new(seed);
    let dataset = cfg.noise.apply(clean.clone(), &mut root.derive("noise"))?;
    let tables = pretrain::<f64>(&dataset, &cfg.backend, &mut root.derive("backend"))?.table;
    let started = Instant::now();
    let trained = train(&dataset, &tables, &cfg.train, &root.derive("denoiser"))?;
    let train_seconds = started.elapsed().as_secs_f64();

    let eval_rng = root.derive("test-inference");
    let backend = evaluate(&BackendScorer { tables: &tables }, &dataset, Split::Test, &cfg.ks, &eval_rng)?;
    let schedule: NoiseSchedule<f64> = cfg.train.schedule.build()?;
    let scorer = DdrmScorer {
        ds: &dataset,
        tables: &tables,
        params: &trained.params,
        schedule: &schedule,
        config: cfg.inference,
    };
    let mut inference_seconds = f64::INFINITY;
    let mut ddrm = None;
    for _ in 0..cfg.timing_repeats.max(1) {
        let t0 = Instant::now();
        let report = evaluate(&scorer, &dataset, Split::Test, &cfg.ks, &eval_rng)?;
        inference_seconds = inference_seconds.min(t0.elapsed().as_secs_f64());
        ddrm = Some(report);
    }
    Ok(PipelineOutcome {
        dataset,
        tables,
        trained,
        backend,
        ddrm: ddrm.unwrap(),
        train_seconds,
        inference_seconds,
    })
}

/// A hyper-parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    NoiseRatio,
    DiffusionSteps,
    Lambda,
    Gamma,
    NoiseScale,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::NoiseRatio => "noise_ratio",
            SweepAxis::DiffusionSteps => "diffusion_steps",
            SweepAxis::Lambda => "lambda",
            SweepAxis::Gamma => "gamma",
            SweepAxis::NoiseScale => "noise_scale",
        }
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &PipelineConfig, value: f64) -> Result<PipelineConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::NoiseRatio => cfg.noise = NoiseSetting::Random(value),
            SweepAxis::DiffusionSteps => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Contract(format!("diffusion steps must be a positive integer, got {value}")));
                }
                cfg.train.schedule.steps = value as usize;
            }
            SweepAxis::Lambda => cfg.train.lambda = value,
            SweepAxis::Gamma => cfg.train.gamma = value,
            SweepAxis::NoiseScale => cfg.train.schedule.scale = value,
        }
        if let NoiseSetting::Random(r) = cfg.noise {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Contract(format!("noise ratio {r} outside [0, 1]")));
            }
        }
        cfg.train.validate()?;
        cfg.train.schedule.build::<f64>()?;
        Ok(cfg)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise_ratio" => Ok(SweepAxis::NoiseRatio),
            "diffusion_steps" => Ok(SweepAxis::DiffusionSteps),
            "lambda" => Ok(SweepAxis::Lambda),
            "gamma" => Ok(SweepAxis::Gamma),
            "noise_scale" => Ok(SweepAxis::NoiseScale),
            other => Err(Error::Contract(format!(
                "unknown sweep axis `{other}` (expected noise_ratio, diffusion_steps, lambda, gamma or noise_scale)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub seed: u64,
    pub backend: MetricReport,
    pub ddrm: MetricReport,
    pub train_seconds: f64,
    pub inference_seconds: f64,
}

/// One full pipeline run per `(value, seed)`, values outermost.
pub fn sweep(
    clean: &InteractionDataset,
    base: &PipelineConfig,
    axis: SweepAxis,
    values: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(values.len() * seeds.len());
    for &value in values {
        let cfg = axis.apply(base, value)?;
        for &seed in seeds {
            let out = run_pipeline(clean, &cfg, seed)?;
            log::info!(
                "{}={value} seed={seed}: backend R@20 {:.4}, denoised R@20 {:.4}",
                axis.as_str(),
                out.backend.recall.last().copied().unwrap_or(f64::NAN),
                out.ddrm.recall.last().copied().unwrap_or(f64::NAN)
            );
            rows.push(SweepRow {
                axis,
                value,
                seed,
                backend: out.backend,
                ddrm: out.ddrm,
                train_seconds: out.train_seconds,
                inference_seconds: out.inference_seconds,
            });
        }
    }
    Ok(rows)
}

/// Random-noise sweep over injection ratios.
pub fn noise_sweep(clean: &InteractionDataset, base: &PipelineConfig, ratios: &[f64], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    sweep(clean, base, SweepAxis::NoiseRatio, ratios, seeds)
}

/// Median of a non-empty sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// `axis,value,seed,model,metric,k,value,n_users,train_seconds,inference_seconds`.
pub fn write_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>, header: &[String]) -> Result<()> {
    let mut out = String::new();
    for h in header {
        writeln!(out, "# {h}").unwrap();
    }
    out.push_str("axis,axis_value,seed,model,metric,k,value,n_users,train_seconds,inference_seconds\n");
    for r in rows {
        for (model, report) in [("backend", &r.backend), ("ddrm", &r.ddrm)] {
            for (metric, values) in [("recall", &report.recall), ("ndcg", &report.ndcg)] {
                for (k, v) in report.ks.iter().zip(values) {
                    writeln!(
                        out,
                        "{},{},{},{model},{metric},{k},{v:.10},{},{:.6},{:.6}",
                        r.axis.as_str(),
                        r.value,
                        r.seed,
                        report.n_users,
                        r.train_seconds,
                        r.inference_seconds
                    )
                    .unwrap();
                }
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}
