//! Full-ranking evaluation and the experiment harness.

mod harness;
mod metrics;
mod report;

pub use harness::{
    median, noise_sweep, run_pipeline, sweep, write_sweep_csv, PipelineConfig, PipelineOutcome, SweepAxis, SweepRow,
};
pub use metrics::{ndcg_at_k, recall_at_k};
pub use report::{
    evaluate, rank_users, summarize, write_metric_report, BackendScorer, DdrmScorer, MetricReport, OracleScorer, Scorer, UserMetrics,
};
