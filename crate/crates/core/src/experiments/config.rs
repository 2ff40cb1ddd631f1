use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{invalid, Result};
use crate::forecasters::{ChannelMode, NvarConfig, ParrotConfig, TRAIN_VAL_SPLIT};
use crate::metrics::MetricConfig;
use crate::systems::{IntegratorConfig, POINTS_PER_LYAPUNOV};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Baseline,
    ContextSweep,
    KgramShuffle,
    Nonstationary,
    IcDependence,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::ContextSweep => "context_sweep",
            Self::KgramShuffle => "kgram_shuffle",
            Self::Nonstationary => "nonstationary",
            Self::IcDependence => "ic_dependence",
        }
    }
}

/// Knobs for the non-baseline experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KindParams {
    pub k_values: Vec<usize>,
    pub f_min_grid: Vec<f64>,
    pub context_grid: Vec<usize>,
    /// Length of the reference orbit for natural-measure densities, in samples.
    pub reference_orbit_len: usize,
    pub permutations: usize,
}

impl Default for KindParams {
    fn default() -> Self {
        Self {
            k_values: vec![1, 2, 4, 8, 16, 32, 64, 128, 256],
            f_min_grid: vec![1.0, 0.8, 0.6, 0.4, 0.2],
            context_grid: vec![5, 16, 51, 160, 512],
            reference_orbit_len: 10_000,
            permutations: 9999,
        }
    }
}

/// How a model is built. In config files a bare string (`"nvar"`) selects the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Naive,
    Nvar {
        #[serde(default)]
        config: NvarConfig,
        /// Select `n_lags` per system on the train/validation split.
        #[serde(default = "yes")]
        tune: bool,
    },
    Parrot {
        #[serde(default)]
        config: ParrotConfig,
    },
    Adapter {
        name: String,
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

fn yes() -> bool {
    true
}

fn default_timeout() -> f64 {
    300.0
}

impl ModelSpec {
    pub fn id(&self) -> String {
        match self {
            Self::Naive => "naive".into(),
            Self::Nvar { .. } => "nvar".into(),
            Self::Parrot { .. } => "parrot".into(),
            Self::Adapter { name, .. } => format!("adapter:{name}"),
        }
    }

    pub fn nvar() -> Self {
        Self::Nvar {
            config: NvarConfig::default(),
            tune: true,
        }
    }

    pub fn parrot() -> Self {
        Self::Parrot {
            config: ParrotConfig::default(),
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "naive" => Some(Self::Naive),
            "nvar" => Some(Self::nvar()),
            "parrot" => Some(Self::parrot()),
            _ => None,
        }
    }
}

pub(crate) fn deserialize_models<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<ModelSpec>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Name(String),
        Full(ModelSpec),
    }
    Vec::<Entry>::deserialize(d)?
        .into_iter()
        .map(|e| match e {
            Entry::Name(n) => ModelSpec::from_name(&n)
                .ok_or_else(|| D::Error::custom(format!("unknown model `{n}` (expected naive, nvar or parrot)"))),
            Entry::Full(m) => Ok(m),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub systems: Vec<String>,
    pub n_ics: usize,
    pub context_len: usize,
    pub horizon: usize,
    pub granularity: usize,
    pub train_val_split: (usize, usize),
    #[serde(deserialize_with = "deserialize_models")]
    pub models: Vec<ModelSpec>,
    pub mode: ChannelMode,
    pub seed: u64,
    pub experiment_kind: ExperimentKind,
    pub kind_params: KindParams,
    pub integrator: IntegratorConfig,
    pub metrics: MetricConfig,
    /// Score correlation dimension and state-space divergence of the joint forecast.
    pub attractor_metrics: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            systems: vec!["Lorenz".into()],
            n_ics: 20,
            context_len: 512,
            horizon: 300,
            granularity: POINTS_PER_LYAPUNOV,
            train_val_split: TRAIN_VAL_SPLIT,
            models: vec![ModelSpec::Naive, ModelSpec::nvar(), ModelSpec::parrot()],
            mode: ChannelMode::ChannelIndependent,
            seed: 0,
            experiment_kind: ExperimentKind::Baseline,
            kind_params: KindParams::default(),
            integrator: IntegratorConfig::default(),
            metrics: MetricConfig::default(),
            attractor_metrics: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.systems.is_empty() {
            return Err(invalid("systems: list is empty"));
        }
        if self.models.is_empty() {
            return Err(invalid("models: list is empty"));
        }
        if self.n_ics == 0 {
            return Err(invalid("n_ics: must be >= 1"));
        }
        if self.horizon == 0 {
            return Err(invalid("horizon: must be >= 1"));
        }
        if self.context_len < 2 {
            return Err(invalid("context_len: must be >= 2"));
        }
        if self.granularity == 0 {
            return Err(invalid("granularity: must be >= 1"));
        }
        let tuned = self
            .models
            .iter()
            .any(|m| matches!(m, ModelSpec::Nvar { tune: true, .. }));
        let (tr, va) = self.train_val_split;
        if tuned && tr + va != self.context_len {
            return Err(invalid(format!(
                "train_val_split: {tr} + {va} must equal context_len {} when tuning",
                self.context_len
            )));
        }
        self.integrator.validate()?;
        self.metrics.validate()?;
        let kp = &self.kind_params;
        match self.experiment_kind {
            ExperimentKind::KgramShuffle => {
                if kp.k_values.is_empty() || kp.k_values.iter().any(|&k| k == 0 || 2 * k > self.context_len) {
                    return Err(invalid(format!(
                        "kind_params.k_values: each k must lie in [1, {}]",
                        self.context_len / 2
                    )));
                }
            }
            ExperimentKind::Nonstationary => {
                if kp.f_min_grid.is_empty() || kp.f_min_grid.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
                    return Err(invalid("kind_params.f_min_grid: values must lie in (0, 1]"));
                }
            }
            ExperimentKind::ContextSweep => {
                if kp.context_grid.is_empty() || kp.context_grid.iter().any(|&c| c < 2) {
                    return Err(invalid("kind_params.context_grid: lengths must be >= 2"));
                }
            }
            ExperimentKind::IcDependence => {
                if kp.reference_orbit_len < 100 {
                    return Err(invalid("kind_params.reference_orbit_len: must be >= 100"));
                }
            }
            ExperimentKind::Baseline => {}
        }
        Ok(())
    }

    /// Longest context any task of this experiment reads.
    pub fn max_context(&self) -> usize {
        match self.experiment_kind {
            ExperimentKind::ContextSweep => self
                .kind_params
                .context_grid
                .iter()
                .copied()
                .max()
                .unwrap_or(0)
                .max(self.context_len),
            _ => self.context_len,
        }
    }

    pub fn dt_lyap(&self) -> f64 {
        1.0 / self.granularity as f64
    }
}
