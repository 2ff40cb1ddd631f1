//! Files, configs, data ingestion and the external-forecaster protocol.

pub mod adapter;
pub mod config;
pub mod conformance;
pub mod manifest;
pub mod pendulum;
pub mod protocol;
pub mod records;
pub mod trajectory_csv;

pub use adapter::{AdapterForecaster, Connection, DEFAULT_TIMEOUT};
pub use config::{load_config, parse_config};
pub use conformance::{run_conformance, CheckResult, ConformanceReport};
pub use manifest::{canonical_hash, config_hash, RunManifest};
pub use pendulum::{ingest_pendulum, read_pendulum_csv, PendulumConfig, PendulumFrame};
pub use protocol::{Message, PROTOCOL_VERSION};
pub use records::{load_records, parse_record, CorruptLine, LoadedRecords, RecordWriter};
pub use trajectory_csv::{read_trajectory, sidecar_path, write_trajectory, TrajectoryMeta};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "CHAOSBENCH_OUT";
