//! Experiment execution: trajectory preparation, per-system tuning, forecasting and scoring.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, ExperimentKind, ModelSpec};
use super::record::{now_millis, RecordStatus, ResultRecord, SCHEMA_VERSION};
use super::transforms::{apply_nonstationarity, kgram_shuffle};
use crate::error::{Error, Result};
use crate::forecasters::{
    forecast_multichannel, timed, tune_lookback, ChannelMode, Forecast, Forecaster, Naive, Nvar, NvarConfig, Parrot,
    LOOKBACK_GRID,
};
use crate::io::adapter::AdapterForecaster;
use crate::metrics::{median, natural_measure_density, score_attractor, score_channel, MetricConfig};
use crate::systems::{generate_trajectory, sample_initial_conditions, Registry, SystemSpec};
use crate::trajectory::Trajectory;
use crate::HARNESS_VERSION;

/// Stable per-task seed derived from the master seed and the task's identity.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

/// The test segment of a task. Forecasters never receive it; it is only read when scoring.
#[derive(Debug, Clone)]
pub struct SealedTest {
    values: Trajectory,
}

impl SealedTest {
    fn new(values: Trajectory) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn score(
        &self,
        context: &Trajectory,
        forecasts: &[Forecast],
        reference_dim: f64,
        cfg: &MetricConfig,
        attractor: bool,
        seed: u64,
    ) -> Result<Vec<crate::metrics::MetricReport>> {
        let d = self.values.dim();
        let h = self.values.len();
        let mut joint = vec![0.0; h * d];
        for (c, f) in forecasts.iter().enumerate() {
            for (t, v) in f.values.iter().enumerate() {
                joint[t * d + c] = *v;
            }
        }
        let geometry = if attractor {
            Some(score_attractor(
                self.values.values(),
                &joint,
                d,
                reference_dim,
                cfg,
                seed,
            )?)
        } else {
            None
        };
        (0..d)
            .map(|c| {
                let r = score_channel(
                    &context.channel(c),
                    &self.values.channel(c),
                    &forecasts[c].values,
                    context.dt_lyap,
                    cfg,
                )?;
                Ok(match geometry {
                    Some(g) => r.with_attractor(g),
                    None => r,
                })
            })
            .collect()
    }
}

/// One forecasting job: a context the models may read and the sealed continuation.
#[derive(Debug, Clone)]
pub struct PreparedTask {
    pub system: String,
    pub ic_index: usize,
    pub context: Trajectory,
    test: SealedTest,
    pub seed: u64,
    pub annotations: BTreeMap<String, Value>,
    /// Set when the task could not be constructed; its records are written as failed.
    pub failure: Option<String>,
}

impl PreparedTask {
    /// Split `window` into its first `context_len` rows (context) and the rest (sealed test).
    pub fn split(system: &str, ic_index: usize, window: &Trajectory, context_len: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            system: system.to_string(),
            ic_index,
            context: window.slice(0, context_len)?,
            test: SealedTest::new(window.slice(context_len, window.len())?),
            seed,
            annotations: BTreeMap::new(),
            failure: None,
        })
    }

    pub fn horizon(&self) -> usize {
        self.test.len()
    }
}

/// Tasks sharing one setting of the experiment knobs.
#[derive(Debug, Clone)]
pub struct TaskGroup {
    pub knobs: BTreeMap<String, Value>,
    pub tasks: Vec<PreparedTask>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub records: usize,
    pub failures: usize,
    /// Systems that could not be prepared, with the reason.
    pub skipped_systems: Vec<(String, String)>,
}

/// Full-length trajectories for every initial condition: `max_context + horizon` rows each.
fn system_trajectories(cfg: &ExperimentConfig, spec: &SystemSpec) -> Result<Vec<Trajectory>> {
    let ics = sample_initial_conditions(
        spec,
        cfg.n_ics,
        &cfg.integrator,
        derive_seed(cfg.seed, &["ics", &spec.name]),
    )?;
    let len = cfg.max_context() + cfg.horizon;
    ics.par_iter()
        .map(|x0| {
            Ok(generate_trajectory(spec, x0, len, cfg.granularity, &cfg.integrator)?.with_system(spec.name.clone()))
        })
        .collect()
}

/// Build the task groups for one system according to the experiment kind.
pub fn prepare_system(cfg: &ExperimentConfig, spec: &SystemSpec) -> Result<Vec<TaskGroup>> {
    let trajs = system_trajectories(cfg, spec)?;
    let max_c = cfg.max_context();
    let h = cfg.horizon;
    let name = spec.name.as_str();
    let seed_for = |ic: usize, knob: &str| derive_seed(cfg.seed, &[name, &ic.to_string(), knob]);
    let window = |t: &Trajectory, c: usize| t.slice(max_c - c, max_c + h);
    let mut groups = Vec::new();
    match cfg.experiment_kind {
        ExperimentKind::Baseline | ExperimentKind::IcDependence => {
            let mut tasks = Vec::new();
            for (i, t) in trajs.iter().enumerate() {
                tasks.push(PreparedTask::split(
                    name,
                    i,
                    &window(t, cfg.context_len)?,
                    cfg.context_len,
                    seed_for(i, ""),
                )?);
            }
            if cfg.experiment_kind == ExperimentKind::IcDependence {
                annotate_density(cfg, spec, &mut tasks)?;
            }
            groups.push(TaskGroup {
                knobs: BTreeMap::new(),
                tasks,
            });
        }
        ExperimentKind::ContextSweep => {
            for &c in &cfg.kind_params.context_grid {
                let knob = format!("context_len={c}");
                let tasks = trajs
                    .iter()
                    .enumerate()
                    .map(|(i, t)| PreparedTask::split(name, i, &window(t, c)?, c, seed_for(i, &knob)))
                    .collect::<Result<_>>()?;
                groups.push(TaskGroup {
                    knobs: BTreeMap::from([("context_len".into(), json!(c))]),
                    tasks,
                });
            }
        }
        ExperimentKind::KgramShuffle => {
            let c = cfg.context_len;
            for &k in &cfg.kind_params.k_values {
                let (mut shuffled, mut truncated) = (Vec::new(), Vec::new());
                for (i, t) in trajs.iter().enumerate() {
                    let w = window(t, c)?;
                    let seed = seed_for(i, &format!("k={k}"));
                    // Shuffling row indices moves every channel with one permutation.
                    let task = match kgram_shuffle(&(0..c).map(|v| v as f64).collect::<Vec<_>>(), k, seed) {
                        Ok(order) => {
                            let mut rows: Vec<f64> = Vec::with_capacity(w.values().len());
                            for &idx in &order {
                                rows.extend_from_slice(w.row(idx as usize));
                            }
                            rows.extend_from_slice(&w.values()[c * w.dim()..]);
                            let sw = Trajectory::new(rows, w.dim(), w.dt_lyap)?.with_t0(w.t0);
                            PreparedTask::split(name, i, &sw, c, seed)?
                        }
                        Err(e @ Error::ShuffleImpossible(_)) => PreparedTask {
                            failure: Some(e.to_string()),
                            ..PreparedTask::split(name, i, &w, c, seed)?
                        },
                        Err(e) => return Err(e),
                    };
                    shuffled.push(task);
                    truncated.push(PreparedTask::split(name, i, &w.slice(c - k, c + h)?, k, seed)?);
                }
                for (cond, tasks) in [("shuffled", shuffled), ("truncated", truncated)] {
                    let knobs = BTreeMap::from([("k".into(), json!(k)), ("condition".into(), json!(cond))]);
                    groups.push(TaskGroup { knobs, tasks });
                }
            }
        }
        ExperimentKind::Nonstationary => {
            for &f in &cfg.kind_params.f_min_grid {
                let knob = format!("f_min={f}");
                let tasks = trajs
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        let w = apply_nonstationarity(&window(t, cfg.context_len)?, f)?;
                        PreparedTask::split(name, i, &w, cfg.context_len, seed_for(i, &knob))
                    })
                    .collect::<Result<_>>()?;
                groups.push(TaskGroup {
                    knobs: BTreeMap::from([("f_min".into(), json!(f))]),
                    tasks,
                });
            }
        }
    }
    Ok(groups)
}

/// Natural-measure density at each task's final context point, absolute and relative to
/// the median density over a reference orbit of the same system.
fn annotate_density(cfg: &ExperimentConfig, spec: &SystemSpec, tasks: &mut [PreparedTask]) -> Result<()> {
    let floor = cfg.metrics.kl_bandwidth_floor;
    let start = sample_initial_conditions(
        spec,
        1,
        &cfg.integrator,
        derive_seed(cfg.seed, &["reference", &spec.name]),
    )?;
    let orbit = generate_trajectory(
        spec,
        &start[0],
        cfg.kind_params.reference_orbit_len,
        cfg.granularity,
        &cfg.integrator,
    )?;
    let d = orbit.dim();
    let stride = (orbit.len() / 500).max(1);
    let typical: Vec<f64> = (0..orbit.len())
        .step_by(stride)
        .map(|i| natural_measure_density(orbit.values(), d, orbit.row(i), floor))
        .collect::<Result<_>>()?;
    let scale = median(&typical).unwrap_or(1.0);
    for t in tasks {
        let mu = natural_measure_density(orbit.values(), d, t.context.last(), floor)?;
        t.annotations.insert("density".into(), json!(mu));
        t.annotations.insert("relative_density".into(), json!(mu / scale));
    }
    Ok(())
}

/// Split a context for tuning: the configured split when it fits, otherwise the same
/// proportions scaled to the context length.
fn tuning_split(cfg: &ExperimentConfig, context_len: usize) -> (usize, usize) {
    let (tr, va) = cfg.train_val_split;
    if tr + va == context_len {
        return (tr, va);
    }
    let va = ((context_len as f64 * va as f64 / (tr + va) as f64).round() as usize)
        .clamp(1, context_len.saturating_sub(2).max(1));
    (context_len.saturating_sub(va), va)
}

struct BuiltModel {
    id: String,
    model: Arc<dyn Forecaster>,
    meta: BTreeMap<String, Value>,
    /// Tuning time, spread over the group's tasks.
    fit_overhead: f64,
    error: Option<String>,
}

fn build_model(
    spec: &ModelSpec,
    cfg: &ExperimentConfig,
    group: &TaskGroup,
    adapters: &mut BTreeMap<String, Arc<dyn Forecaster>>,
) -> BuiltModel {
    let plain = |model: Arc<dyn Forecaster>| BuiltModel {
        id: spec.id(),
        model,
        meta: BTreeMap::new(),
        fit_overhead: 0.0,
        error: None,
    };
    match spec {
        ModelSpec::Naive => plain(Arc::new(Naive)),
        ModelSpec::Parrot { config } => plain(Arc::new(Parrot::new(*config))),
        ModelSpec::Nvar { config, tune: false } => plain(Arc::new(Nvar::new(*config))),
        ModelSpec::Nvar { config, tune: true } => {
            let base = *config;
            let factory =
                move |lags: usize| -> Box<dyn Forecaster> { Box::new(Nvar::new(NvarConfig { n_lags: lags, ..base })) };
            let contexts: Vec<Trajectory> = group.tasks.iter().map(|t| t.context.clone()).collect();
            let c = contexts.first().map_or(0, Trajectory::len);
            let (tuned, secs) = timed(|| {
                tune_lookback(
                    &factory,
                    &contexts,
                    tuning_split(cfg, c),
                    &LOOKBACK_GRID,
                    cfg.granularity,
                    cfg.mode,
                )
            });
            match tuned {
                Ok(t) => {
                    let mut b = plain(Arc::new(Nvar::new(NvarConfig {
                        n_lags: t.lookback,
                        ..base
                    })));
                    b.meta.insert("lookback".into(), json!(t.lookback));
                    b.meta.insert("lookback_lyap".into(), json!(t.fraction));
                    b.fit_overhead = secs / group.tasks.len().max(1) as f64;
                    b
                }
                Err(e) => BuiltModel {
                    error: Some(format!("tuning failed: {e}")),
                    ..plain(Arc::new(Naive))
                },
            }
        }
        ModelSpec::Adapter {
            name,
            command,
            timeout_secs,
        } => {
            let model = adapters.entry(name.clone()).or_insert_with(|| {
                Arc::new(AdapterForecaster::new(
                    name.clone(),
                    command.clone(),
                    std::time::Duration::from_secs_f64(*timeout_secs),
                ))
            });
            plain(model.clone())
        }
    }
}

fn records_for_task(
    cfg: &ExperimentConfig,
    spec: &SystemSpec,
    built: &BuiltModel,
    knobs: &BTreeMap<String, Value>,
    task: &PreparedTask,
) -> Vec<ResultRecord> {
    let d = task.context.dim();
    let mut kind_params = knobs.clone();
    if cfg.mode == ChannelMode::Multivariate {
        kind_params.insert("mode".into(), json!("multivariate"));
    }
    let model_seed = derive_seed(task.seed, &[&built.id]);
    let base = |channel: usize| ResultRecord {
        schema_version: SCHEMA_VERSION,
        system: task.system.clone(),
        ic_index: task.ic_index,
        channel,
        model_id: built.id.clone(),
        experiment_kind: cfg.experiment_kind,
        kind_params: kind_params.clone(),
        status: RecordStatus::Ok,
        metrics: None,
        fit_walltime: 0.0,
        inference_walltime: 0.0,
        seed: model_seed,
        master_seed: cfg.seed,
        timestamp: now_millis(),
        harness_version: HARNESS_VERSION.to_string(),
        forecast_meta: built.meta.clone(),
        annotations: task.annotations.clone(),
        extra: BTreeMap::new(),
    };
    let fail = |reason: String| {
        (0..d)
            .map(|c| ResultRecord {
                status: RecordStatus::Failed { reason: reason.clone() },
                ..base(c)
            })
            .collect::<Vec<_>>()
    };
    if let Some(e) = task.failure.as_ref().or(built.error.as_ref()) {
        return fail(e.clone());
    }
    let forecasts = match forecast_multichannel(built.model.as_ref(), &task.context, task.horizon(), cfg.mode) {
        Ok(f) => f,
        Err(e) => return fail(e.to_string()),
    };
    if let Some(bad) = forecasts
        .iter()
        .find(|f| f.values.len() != task.horizon() || f.values.iter().any(|v| !v.is_finite()))
    {
        return fail(format!(
            "forecast has {} values (expected {}) or non-finite entries",
            bad.values.len(),
            task.horizon()
        ));
    }
    let reports = match task.test.score(
        &task.context,
        &forecasts,
        spec.reference_fractal_dim,
        &cfg.metrics,
        cfg.attractor_metrics,
        model_seed,
    ) {
        Ok(r) => r,
        Err(e) => return fail(format!("scoring failed: {e}")),
    };
    forecasts
        .into_iter()
        .zip(reports)
        .enumerate()
        .map(|(c, (f, r))| {
            let mut rec = base(c);
            rec.fit_walltime = f.fit_walltime + built.fit_overhead / d as f64;
            rec.inference_walltime = f.inference_walltime;
            rec.forecast_meta.extend(f.metadata);
            rec.metrics = Some(r);
            rec
        })
        .collect()
}

/// Run every model on every task of `groups`, in a deterministic record order.
pub fn run_groups(
    cfg: &ExperimentConfig,
    spec: &SystemSpec,
    groups: &[TaskGroup],
    adapters: &mut BTreeMap<String, Arc<dyn Forecaster>>,
) -> Vec<ResultRecord> {
    let mut out = Vec::new();
    for group in groups {
        for model in &cfg.models {
            let built = build_model(model, cfg, group, adapters);
            let recs: Vec<Vec<ResultRecord>> = group
                .tasks
                .par_iter()
                .map(|t| records_for_task(cfg, spec, &built, &group.knobs, t))
                .collect();
            out.extend(recs.into_iter().flatten());
        }
    }
    out
}

/// Execute `cfg`, handing each record to `sink` as soon as its system finishes.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    registry: &Registry,
    sink: &mut dyn FnMut(&ResultRecord) -> Result<()>,
) -> Result<RunSummary> {
    cfg.validate()?;
    let specs: Vec<&SystemSpec> = cfg.systems.iter().map(|s| registry.get(s)).collect::<Result<_>>()?;
    let mut summary = RunSummary::default();
    let mut adapters: BTreeMap<String, Arc<dyn Forecaster>> = BTreeMap::new();
    for spec in specs {
        let groups = match prepare_system(cfg, spec) {
            Ok(g) => g,
            Err(e @ (Error::IntegrationBlowup { .. } | Error::StepSizeUnderflow(_))) => {
                summary.skipped_systems.push((spec.name.clone(), e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        for rec in run_groups(cfg, spec, &groups, &mut adapters) {
            summary.records += 1;
            if !rec.is_ok() {
                summary.failures += 1;
            }
            sink(&rec)?;
        }
    }
    Ok(summary)
}

/// Execute `cfg` and collect all records in memory.
pub fn run_benchmark(cfg: &ExperimentConfig, registry: &Registry) -> Result<(Vec<ResultRecord>, RunSummary)> {
    let mut records = Vec::new();
    let summary = run_experiment(cfg, registry, &mut |r| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok((records, summary))
}
