//! Forecast models and the channel-independent / multivariate orchestration around them.

pub mod naive;
pub mod nvar;
pub mod parrot;
pub mod tuning;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, Error, Result};
use crate::trajectory::Trajectory;

pub use naive::{naive_forecast, Naive};
pub use nvar::{nvar_fit, nvar_fit_multivariate, nvar_forecast, Nvar, NvarConfig, NvarModel};
pub use parrot::{parrot_forecast, Parrot, ParrotConfig, Similarity};
pub use tuning::{lag_grid, tune_lookback, TuneResult, TuneRow, LOOKBACK_GRID, TRAIN_VAL_SPLIT};

/// One single-channel prediction job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastTask {
    pub context: Vec<f64>,
    pub horizon: usize,
    pub channel_index: usize,
    pub dt_lyap: f64,
}

impl ForecastTask {
    pub fn new(context: Vec<f64>, horizon: usize, channel_index: usize, dt_lyap: f64) -> Result<Self> {
        let task = Self {
            context,
            horizon,
            channel_index,
            dt_lyap,
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        if self.context.len() < 2 {
            return Err(invalid("context needs at least two points"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon must be >= 1"));
        }
        if self.context.iter().any(|v| !v.is_finite()) {
            return Err(invalid("context contains non-finite values"));
        }
        if !(self.dt_lyap > 0.0) {
            return Err(invalid("dt_lyap must be > 0"));
        }
        Ok(())
    }
}

/// Model output for one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub values: Vec<f64>,
    pub model_id: String,
    pub fit_walltime: f64,
    pub inference_walltime: f64,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
}

impl Forecast {
    pub fn new(values: Vec<f64>, model_id: impl Into<String>) -> Self {
        Self {
            values,
            model_id: model_id.into(),
            fit_walltime: 0.0,
            inference_walltime: 0.0,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    /// Bool-valued metadata flag, false when absent.
    pub fn flag(&self, key: &str) -> bool {
        self.metadata.get(key).and_then(Value::as_bool).unwrap_or(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    #[default]
    ChannelIndependent,
    Multivariate,
}

/// Common interface for in-core models and external adapters.
///
/// Implementations must be deterministic given their inputs.
pub trait Forecaster: Send + Sync {
    fn id(&self) -> String;

    fn forecast(&self, task: &ForecastTask) -> Result<Forecast>;

    /// Joint forecast of every channel of `context` (rows are time steps).
    fn forecast_joint(&self, _context: &Trajectory, _horizon: usize) -> Result<Vec<Forecast>> {
        Err(Error::UnsupportedMode(format!(
            "{} has no multivariate mode",
            self.id()
        )))
    }
}

/// Forecast every channel of `context`, one at a time or jointly.
pub fn forecast_multichannel(
    model: &dyn Forecaster,
    context: &Trajectory,
    horizon: usize,
    mode: ChannelMode,
) -> Result<Vec<Forecast>> {
    match mode {
        ChannelMode::ChannelIndependent => (0..context.dim())
            .map(|c| {
                let task = ForecastTask::new(context.channel(c), horizon, c, context.dt_lyap)?;
                model.forecast(&task)
            })
            .collect(),
        ChannelMode::Multivariate => {
            if context.dim() == 1 {
                let task = ForecastTask::new(context.channel(0), horizon, 0, context.dt_lyap)?;
                return Ok(vec![model.forecast(&task)?]);
            }
            let out = model.forecast_joint(context, horizon)?;
            if out.len() != context.dim() {
                return Err(invalid("joint forecast returned the wrong channel count"));
            }
            Ok(out)
        }
    }
}

/// Run `f`, returning its output and elapsed wall-clock seconds.
pub(crate) fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}
