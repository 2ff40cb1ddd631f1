use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::ExperimentKind;
use crate::metrics::MetricReport;

/// Version of the record layout written by this harness.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Failed { reason: String },
}

/// One benchmark row: system x initial condition x channel x model x knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub system: String,
    pub ic_index: usize,
    pub channel: usize,
    pub model_id: String,
    pub experiment_kind: ExperimentKind,
    /// Experiment knobs (`k`, `condition`, `f_min`, `context_len`, `mode`, ...).
    pub kind_params: BTreeMap<String, Value>,
    pub status: RecordStatus,
    pub metrics: Option<MetricReport>,
    pub fit_walltime: f64,
    pub inference_walltime: f64,
    /// Seed this task's randomness was derived from.
    pub seed: u64,
    pub master_seed: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
    pub harness_version: String,
    /// Model notes (matched offsets, tuned lookback, divergence flags).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub forecast_meta: BTreeMap<String, Value>,
    /// Per-task measurements that are not forecast scores (e.g. natural-measure density).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub annotations: BTreeMap<String, Value>,
    /// Fields written by other versions or tools, carried through untouched.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl ResultRecord {
    pub fn is_ok(&self) -> bool {
        self.status == RecordStatus::Ok
    }

    pub fn vpt(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.vpt_lyap)
    }

    /// Copy with timestamps and walltimes zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.timestamp = 0;
        r.fit_walltime = 0.0;
        r.inference_walltime = 0.0;
        r
    }

    /// Grouping key value for `key`: a top-level field or `kind_params.<name>`.
    pub fn key(&self, key: &str) -> Option<String> {
        let s = |v: &Value| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        match key {
            "system" => Some(self.system.clone()),
            "ic_index" => Some(self.ic_index.to_string()),
            "channel" => Some(self.channel.to_string()),
            "model_id" | "model" => Some(self.model_id.clone()),
            "experiment_kind" => Some(self.experiment_kind.as_str().to_string()),
            k => {
                let name = k.strip_prefix("kind_params.").unwrap_or(k);
                self.kind_params.get(name).map(s)
            }
        }
    }
}

pub fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
