use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use ddrm::backend::{pretrain, read_embeddings, write_embeddings, EmbeddingTable};
use ddrm::data::{chronological_split, load_interactions, read_manifest, write_manifest, InteractionDataset, Split};
use ddrm::diffusion::{read_denoiser, write_denoiser, DenoiserParams, NoiseSchedule};
use ddrm::eval::{
    median, rank_users, summarize, sweep, write_metric_report, write_sweep_csv, BackendScorer, DdrmScorer, MetricReport,
    OracleScorer, Scorer,
};
use ddrm::inference::write_recommendations;
use ddrm::numerics::Rng;
use ddrm::training::{train, write_training_log, StopReason};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "split.tsv";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const PRETRAIN_LOG_FILE: &str = "pretrain_log.csv";
pub const DENOISER_FILE: &str = "denoiser.bin";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const RECOMMENDATIONS_FILE: &str = "recommendations.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const BACKEND_METRICS_FILE: &str = "metrics_backend.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Failure classes mapped to exit status 2 and 1.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

fn require_file(path: &Path, what: &str) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} not found: {}", path.display())))
    }
}

fn prepare_out(cfg: &RunConfig) -> CmdResult {
    fs::create_dir_all(&cfg.out).with_context(|| format!("cannot create output directory {}", cfg.out.display()))?;
    Ok(())
}

fn write_meta(cfg: &RunConfig, artifact: &Path) -> CmdResult {
    let mut name = artifact.as_os_str().to_owned();
    name.push(".meta");
    fs::write(&name, format!("config_hash={}\nseed={}\n", cfg.fingerprint(), cfg.seed))?;
    Ok(())
}

/// The split dataset with noise applied: from an explicit manifest as is,
/// otherwise by splitting and corrupting the raw interaction file.
fn noisy_dataset(cfg: &RunConfig, root: &Rng) -> CmdResult<InteractionDataset> {
    if let Some(m) = &cfg.manifest {
        require_file(m, "split manifest")?;
        return Ok(read_manifest(m)?);
    }
    let clean = clean_dataset(cfg)?;
    let noise = cfg.noise_setting().map_err(Failure::Usage)?;
    Ok(noise.apply(clean, &mut root.derive("noise"))?)
}

fn clean_dataset(cfg: &RunConfig) -> CmdResult<InteractionDataset> {
    let path = cfg.dataset.as_ref().ok_or_else(|| usage("no dataset configured (set `dataset`)"))?;
    require_file(path, "dataset")?;
    let log = load_interactions(path)?;
    chronological_split(&log, cfg.split_ratios()).map_err(|e| Failure::Usage(e.into()))
}

fn load_split(cfg: &RunConfig) -> CmdResult<InteractionDataset> {
    let path = cfg.manifest_path();
    require_file(&path, "split manifest")?;
    Ok(read_manifest(&path)?)
}

fn load_embeddings(cfg: &RunConfig, ds: &InteractionDataset) -> CmdResult<EmbeddingTable<f64>> {
    let path = cfg.embeddings_path();
    require_file(&path, "embedding checkpoint")?;
    let tables: EmbeddingTable<f64> = read_embeddings(&path)?;
    if tables.num_users() != ds.num_users || tables.num_items() != ds.num_items {
        return Err(usage(format!(
            "embedding checkpoint covers {} users / {} items but the split has {} / {}",
            tables.num_users(),
            tables.num_items(),
            ds.num_users,
            ds.num_items
        )));
    }
    if tables.dim() != cfg.dim {
        return Err(usage(format!(
            "embedding checkpoint has dimension {} but the configuration says dim = {}",
            tables.dim(),
            cfg.dim
        )));
    }
    Ok(tables)
}

pub fn cmd_inject_noise(cfg: &RunConfig) -> CmdResult {
    let root = Rng::new(cfg.seed);
    let ds = noisy_dataset(cfg, &root)?;
    prepare_out(cfg)?;
    let path = cfg.out.join(MANIFEST_FILE);
    write_manifest(&ds, &path, &cfg.header())?;
    let (tn, vn) = ds.noise_count();
    println!(
        "train {} ({} noisy), valid {} ({} noisy), test {} -> {}",
        ds.train().len(),
        tn,
        ds.valid().len(),
        vn,
        ds.test().len(),
        path.display()
    );
    Ok(())
}

pub fn cmd_pretrain(cfg: &RunConfig) -> CmdResult {
    let root = Rng::new(cfg.seed);
    let ds = noisy_dataset(cfg, &root)?;
    let backend = cfg.backend_config().map_err(Failure::Usage)?;
    prepare_out(cfg)?;
    write_manifest(&ds, cfg.out.join(MANIFEST_FILE), &cfg.header())?;
    if !ds.cold_users().is_empty() {
        log::warn!("{} users have no training positives and are skipped in evaluation", ds.cold_users().len());
    }
    let out = pretrain::<f64>(&ds, &backend, &mut root.derive("backend"))?;
    let ckpt = cfg.out.join(EMBEDDINGS_FILE);
    write_embeddings(&out.table, &ckpt)?;
    write_meta(cfg, &ckpt)?;
    let mut csv = String::new();
    for h in cfg.header() {
        writeln!(csv, "# {h}").unwrap();
    }
    csv.push_str("epoch,loss\n");
    for (e, l) in out.losses.iter().enumerate() {
        writeln!(csv, "{},{l:.12e}", e + 1).unwrap();
    }
    fs::write(cfg.out.join(PRETRAIN_LOG_FILE), csv)?;
    println!(
        "{} backend, {} users x {} items, d = {}: final loss {:.6} -> {}",
        backend.kind.as_str(),
        ds.num_users,
        ds.num_items,
        backend.dim,
        out.losses.last().copied().unwrap_or(f64::NAN),
        ckpt.display()
    );
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig) -> CmdResult {
    let root = Rng::new(cfg.seed);
    let ds = load_split(cfg)?;
    let tables = load_embeddings(cfg, &ds)?;
    let train_cfg = cfg.train_config().map_err(Failure::Usage)?;
    prepare_out(cfg)?;
    let trained = train(&ds, &tables, &train_cfg, &root.derive("denoiser"))?;
    let ckpt = cfg.out.join(DENOISER_FILE);
    write_denoiser(&trained.params, &ckpt)?;
    write_meta(cfg, &ckpt)?;
    write_training_log(&trained.records, cfg.out.join(TRAIN_LOG_FILE), &cfg.header())?;
    let best = trained
        .best_epoch
        .and_then(|e| trained.records.iter().find(|r| r.epoch == e))
        .map(|r| format!("best epoch {} (valid Recall@20 {:.4})", r.epoch, r.recall20_valid))
        .unwrap_or_else(|| "no epochs run".into());
    println!("{} epochs, {best} -> {}", trained.records.len(), ckpt.display());
    if let StopReason::Diverged { epoch } = trained.stop {
        return Err(Failure::Runtime(anyhow!(
            "training diverged in epoch {epoch}; the last good parameters were written"
        )));
    }
    Ok(())
}

fn print_summary(rows: &[(&str, &MetricReport)]) {
    let ks = &rows[0].1.ks;
    let mut head = format!("{:<10}", "model");
    for k in ks {
        write!(head, " {:>9}", format!("R@{k}")).unwrap();
    }
    for k in ks {
        write!(head, " {:>9}", format!("N@{k}")).unwrap();
    }
    head.push_str("     users");
    println!("{head}");
    for (name, r) in rows {
        let mut line = format!("{name:<10}");
        for v in r.recall.iter().chain(&r.ndcg) {
            write!(line, " {v:>9.4}").unwrap();
        }
        write!(line, " {:>9}", r.n_users).unwrap();
        println!("{line}");
    }
}

pub fn cmd_evaluate(cfg: &RunConfig) -> CmdResult {
    let model = cfg.model.as_str();
    let root = Rng::new(cfg.seed);
    let ds = load_split(cfg)?;
    let tables = load_embeddings(cfg, &ds)?;
    let eval_rng = root.derive("test-inference");
    let hash = cfg.fingerprint();
    let max_k = *cfg.ks.iter().max().unwrap();
    let users = ds.evaluable_users(Split::Test);
    if !ds.cold_users().is_empty() {
        log::warn!("skipping {} cold users", ds.cold_users().len());
    }

    let backend_scorer = BackendScorer { tables: &tables };
    let oracle = OracleScorer { ds: &ds, target: Split::Test };
    let denoiser: Option<(DenoiserParams<f64>, NoiseSchedule<f64>)> = if model == "ddrm" {
        let path = cfg.denoiser_path();
        require_file(&path, "denoiser checkpoint")?;
        let params: DenoiserParams<f64> = read_denoiser(&path)?;
        if params.dim() != tables.dim() {
            return Err(usage(format!(
                "denoiser dimension {} does not match embedding dimension {}",
                params.dim(),
                tables.dim()
            )));
        }
        let schedule = cfg.schedule_config().map_err(Failure::Usage)?.build()?;
        Some((params, schedule))
    } else {
        None
    };
    let ddrm_scorer = denoiser.as_ref().map(|(params, schedule)| DdrmScorer {
        ds: &ds,
        tables: &tables,
        params,
        schedule,
        config: cfg.inference_config().expect("validated at load"),
    });
    let scorer: &dyn Scorer<f64> = match model {
        "ddrm" => ddrm_scorer.as_ref().unwrap(),
        "backend" => &backend_scorer,
        "oracle" => &oracle,
        other => return Err(usage(format!("unknown model `{other}` (expected ddrm, backend or oracle)"))),
    };

    prepare_out(cfg)?;
    let lists = rank_users(scorer, &ds, &users, Split::Test, max_k, &eval_rng)?;
    let report = summarize(&ds, Split::Test, &cfg.ks, &lists).with_hash(hash.clone());
    write_recommendations(&lists, &ds.user_ids, &ds.item_ids, cfg.out.join(RECOMMENDATIONS_FILE), &cfg.header())?;
    write_metric_report(&report, cfg.out.join(METRICS_FILE), &cfg.header())?;

    let mut rows = vec![(model, &report)];
    let backend_report;
    if model != "backend" {
        let bl = rank_users(&backend_scorer, &ds, &users, Split::Test, max_k, &eval_rng)?;
        backend_report = summarize(&ds, Split::Test, &cfg.ks, &bl).with_hash(hash);
        write_metric_report(&backend_report, cfg.out.join(BACKEND_METRICS_FILE), &cfg.header())?;
        rows.push(("backend", &backend_report));
    }
    print_summary(&rows);
    Ok(())
}

pub fn cmd_sweep(cfg: &RunConfig) -> CmdResult {
    let axis = cfg.sweep_axis().map_err(Failure::Usage)?;
    if cfg.sweep_values.is_empty() || cfg.sweep_seeds.is_empty() {
        return Err(usage("sweep needs at least one value and one seed"));
    }
    let base = cfg.pipeline().map_err(Failure::Usage)?;
    for &v in &cfg.sweep_values {
        axis.apply(&base, v).map_err(|e| Failure::Usage(e.into()))?;
    }
    let clean = clean_dataset(cfg)?;
    prepare_out(cfg)?;
    let rows = sweep(&clean, &base, axis, &cfg.sweep_values, &cfg.sweep_seeds)?;
    write_sweep_csv(&rows, cfg.out.join(SWEEP_FILE), &cfg.header())?;

    let k = *cfg.ks.iter().max().unwrap();
    println!("{:>12} {:>12} {:>12} {:>14}", axis.as_str(), format!("backend R@{k}"), format!("ddrm R@{k}"), "inference s");
    for &v in &cfg.sweep_values {
        let at: Vec<_> = rows.iter().filter(|r| r.value == v).collect();
        let med = |f: &dyn Fn(&ddrm::eval::SweepRow) -> f64| median(&at.iter().map(|r| f(r)).collect::<Vec<_>>());
        println!(
            "{v:>12} {:>12.4} {:>12.4} {:>14.4}",
            med(&|r| r.backend.recall_at(k)),
            med(&|r| r.ddrm.recall_at(k)),
            med(&|r| r.inference_seconds)
        );
    }
    Ok(())
}
