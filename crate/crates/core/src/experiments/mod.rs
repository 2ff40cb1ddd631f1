//! Experiment battery: baseline benchmark, context sweeps, k-gram shuffles,
//! nonstationarity probes and initial-condition dependence.

pub mod aggregate;
pub mod config;
pub mod record;
pub mod runner;
pub mod transforms;

pub use aggregate::{
    aggregate, ic_dependence, median_curve, paired_vpt_test, summarize, vpt_trend, AggregateRow, ExperimentSummary,
    IcDependence, IcPair, PairedTest, Summary, Trend, BOOTSTRAP_RESAMPLES, METRICS,
};
pub use config::{ExperimentConfig, ExperimentKind, KindParams, ModelSpec};
pub use record::{now_millis, RecordStatus, ResultRecord, SCHEMA_VERSION};
pub use runner::{
    derive_seed, prepare_system, run_benchmark, run_experiment, run_groups, PreparedTask, RunSummary, TaskGroup,
};
pub use transforms::{
    apply_nonstationarity, kgram_blocks, kgram_shuffle, nonstationarity_factors, permute_blocks, MAX_SHUFFLE_DRAWS,
};
