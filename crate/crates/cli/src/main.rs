mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use commands::Failure;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "ddrm", version, about = "Denoise recommender embeddings with conditional diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed all randomness derives from.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override a configuration key (repeatable), e.g. `--set lambda=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Split (and corrupt) the interaction log and write the split manifest.
    InjectNoise {
        #[command(flatten)]
        common: Common,
        /// clean, natural or random.
        #[arg(long)]
        noise: Option<String>,
        /// Injection ratio for random noise.
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Train the collaborative-filtering backend and write its embeddings.
    Pretrain {
        #[command(flatten)]
        common: Common,
    },
    /// Train the denoisers on frozen backend embeddings.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Generate recommendations for the test split and report metrics.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Reverse-chain start: average or pure_noise.
        #[arg(long)]
        start: Option<String>,
        /// Add posterior noise on each reverse step.
        #[arg(long)]
        stochastic: bool,
        /// Model to score with: ddrm, backend or oracle.
        #[arg(long)]
        model: Option<String>,
    },
    /// Run the full pipeline over a grid of one hyper-parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// noise_ratio, diffusion_steps, lambda, gamma or noise_scale.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Reverse-chain start: average or pure_noise.
        #[arg(long)]
        start: Option<String>,
    },
}

fn load(common: &Common, extra: Vec<(String, toml::Value)>) -> Result<RunConfig, Failure> {
    let mut overrides = RunConfig::overrides_from_pairs(&common.set).map_err(Failure::Usage)?;
    if let Some(seed) = common.seed {
        let seed = i64::try_from(seed).context("seed must fit in a signed 64-bit integer").map_err(Failure::Usage)?;
        overrides.push(("seed".into(), toml::Value::Integer(seed)));
    }
    if let Some(out) = &common.out {
        overrides.push(("out".into(), toml::Value::String(out.to_string_lossy().into_owned())));
    }
    overrides.extend(extra);
    RunConfig::load(common.config.as_deref(), &overrides).map_err(Failure::Usage)
}

fn string(key: &str, v: &Option<String>) -> Option<(String, toml::Value)> {
    v.as_ref().map(|s| (key.to_string(), toml::Value::String(s.clone())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::InjectNoise { common, noise, ratio } => {
            let mut extra: Vec<_> = string("noise", &noise).into_iter().collect();
            extra.extend(ratio.map(|r| ("noise_ratio".to_string(), toml::Value::Float(r))));
            commands::cmd_inject_noise(&load(&common, extra)?)
        }
        Command::Pretrain { common } => commands::cmd_pretrain(&load(&common, vec![])?),
        Command::Train { common } => commands::cmd_train(&load(&common, vec![])?),
        Command::Evaluate { common, start, stochastic, model } => {
            let mut extra: Vec<_> = string("start", &start).into_iter().chain(string("model", &model)).collect();
            if stochastic {
                extra.push(("stochastic".into(), toml::Value::Boolean(true)));
            }
            commands::cmd_evaluate(&load(&common, extra)?)
        }
        Command::Sweep { common, axis, values, seeds, start } => {
            let mut extra: Vec<_> = string("sweep_axis", &axis).into_iter().chain(string("start", &start)).collect();
            if let Some(v) = values {
                extra.push(("sweep_values".into(), toml::Value::Array(v.into_iter().map(toml::Value::Float).collect())));
            }
            if let Some(s) = seeds {
                let s: Result<Vec<_>, _> = s.into_iter().map(|x| i64::try_from(x).map(toml::Value::Integer)).collect();
                let s = s.context("seeds must fit in a signed 64-bit integer").map_err(Failure::Usage)?;
                extra.push(("sweep_seeds".into(), toml::Value::Array(s)));
            }
            commands::cmd_sweep(&load(&common, extra)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
