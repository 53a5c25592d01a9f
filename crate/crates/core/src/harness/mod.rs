//! Experiment driver: configuration, channel dumps, sweeps and output.

pub mod config;
pub mod dump;
pub mod output;
pub mod sweep;

pub use config::{BasisMode, CnSetting, ExperimentConfig, Source};
pub use dump::{
    decode_dump, encode_dump, ingest_channels, sample_covariance, structured_complexity, write_channels, Complexity,
};
pub use output::{emit_results, read_jsonl, write_results, OutputFormat};
pub use sweep::{build_model, plan, plan_with, resolve_cn, run_rd_sweep, run_rd_sweep_with, ResultRecord, Scenario};
