//! Run manifests and canonical configuration hashing.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::experiments::{ExperimentConfig, RunSummary};
use crate::systems::Registry;
use crate::HARNESS_VERSION;

/// SHA-256 of the config's JSON form. Object keys are emitted in sorted order, so
/// key order and formatting of the source file do not affect the hash.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    canonical_hash(&serde_json::to_value(cfg).expect("configs serialize"))
}

pub fn canonical_hash(value: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub harness_version: String,
    pub registry_checksum: String,
    pub master_seed: u64,
    /// Unix milliseconds.
    pub started: u64,
    pub finished: u64,
    pub records: usize,
    pub successes: usize,
    pub failures: usize,
    pub skipped_systems: Vec<(String, String)>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(cfg: &ExperimentConfig, registry: &Registry, started: u64, finished: u64, summary: &RunSummary) -> Self {
        Self {
            config_hash: config_hash(cfg),
            harness_version: HARNESS_VERSION.into(),
            registry_checksum: registry.checksum().into(),
            master_seed: cfg.seed,
            started,
            finished,
            records: summary.records,
            successes: summary.records - summary.failures,
            failures: summary.failures,
            skipped_systems: summary.skipped_systems.clone(),
            config: cfg.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
