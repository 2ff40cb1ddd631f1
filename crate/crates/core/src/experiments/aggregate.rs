//! Summaries over result records: grouped medians, paired tests and trend statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::ExperimentKind;
use super::record::ResultRecord;
use crate::error::{invalid, Error, Result};
use crate::metrics::{bootstrap_median_se, median, paired_permutation_p, spearman, spearman_permutation_p};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Median and bootstrap standard error of one metric within a group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub se: f64,
    pub n: usize,
}

impl Summary {
    fn of(values: &[f64], seed: u64) -> Option<Self> {
        Some(Self {
            median: median(values)?,
            se: bootstrap_median_se(values, BOOTSTRAP_RESAMPLES, seed)?,
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    /// Group key values, in the order the keys were requested.
    pub group: Vec<(String, String)>,
    pub n_ok: usize,
    pub n_failed: usize,
    /// Per-metric summaries keyed by metric name.
    pub metrics: BTreeMap<String, Summary>,
    /// Pointwise median of the sMAPE curves.
    pub smape_curve: Vec<f64>,
}

impl AggregateRow {
    pub fn get(&self, metric: &str) -> Option<Summary> {
        self.metrics.get(metric).copied()
    }

    pub fn key(&self, name: &str) -> Option<&str> {
        self.group.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

/// Scalar metrics summarized by [`aggregate`].
pub const METRICS: [&str; 6] = [
    "vpt",
    "smape_mean",
    "d_frac_pred",
    "d_frac_error",
    "d_stsp",
    "context_overlap",
];

fn metric_values(r: &ResultRecord) -> [Option<f64>; 6] {
    match &r.metrics {
        Some(m) => [
            Some(m.vpt_lyap),
            Some(m.smape_mean),
            m.d_frac_pred,
            m.d_frac_error,
            m.d_stsp,
            m.context_overlap,
        ],
        None => [None; 6],
    }
}

/// Pointwise median over curves of possibly different lengths.
pub fn median_curve(curves: &[&[f64]]) -> Vec<f64> {
    let len = curves.iter().map(|c| c.len()).max().unwrap_or(0);
    (0..len)
        .map_while(|t| {
            let col: Vec<f64> = curves.iter().filter_map(|c| c.get(t).copied()).collect();
            median(&col)
        })
        .collect()
}

/// Group `records` by `keys` and summarize every metric. Groups whose records all
/// failed keep their failure count but carry no summaries. Records lacking a key are skipped.
pub fn aggregate(records: &[ResultRecord], keys: &[&str], seed: u64) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<Vec<String>, Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        if let Some(k) = keys.iter().map(|k| r.key(k)).collect::<Option<Vec<_>>>() {
            groups.entry(k).or_default().push(r);
        }
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(gi, (k, recs))| {
            let ok: Vec<&ResultRecord> = recs
                .iter()
                .copied()
                .filter(|r| r.is_ok() && r.metrics.is_some())
                .collect();
            let vals: Vec<[Option<f64>; 6]> = ok.iter().map(|r| metric_values(r)).collect();
            let metrics = METRICS
                .iter()
                .enumerate()
                .filter_map(|(mi, name)| {
                    let col: Vec<f64> = vals.iter().filter_map(|v| v[mi]).filter(|v| v.is_finite()).collect();
                    Summary::of(&col, seed.wrapping_add((gi * METRICS.len() + mi) as u64))
                        .map(|s| (name.to_string(), s))
                })
                .collect();
            let curves: Vec<&[f64]> = ok
                .iter()
                .map(|r| r.metrics.as_ref().expect("ok").smape_curve.as_slice())
                .collect();
            AggregateRow {
                group: keys.iter().map(|s| s.to_string()).zip(k).collect(),
                n_ok: ok.len(),
                n_failed: recs.len() - ok.len(),
                metrics,
                smape_curve: median_curve(&curves),
            }
        })
        .collect()
}

/// Identity of a forecasting task independent of the model.
fn task_key(r: &ResultRecord) -> (String, usize, usize, String) {
    (
        r.system.clone(),
        r.ic_index,
        r.channel,
        serde_json::to_string(&r.kind_params).unwrap_or_default(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub n_pairs: usize,
    /// Median of `a - b`.
    pub median_diff: f64,
    pub median_a: f64,
    pub median_b: f64,
    /// One-sided p-value for `a > b`.
    pub p_value: f64,
}

/// Paired sign-flip test of VPT(`model_a`) > VPT(`model_b`) over tasks both completed.
pub fn paired_vpt_test(
    records: &[ResultRecord],
    model_a: &str,
    model_b: &str,
    n_perm: usize,
    seed: u64,
) -> Result<PairedTest> {
    let collect = |m: &str| -> BTreeMap<_, f64> {
        records
            .iter()
            .filter(|r| r.model_id == m && r.is_ok())
            .filter_map(|r| Some((task_key(r), r.vpt()?)))
            .collect()
    };
    let (a, b) = (collect(model_a), collect(model_b));
    let pairs: Vec<(f64, f64)> = a.iter().filter_map(|(k, &va)| Some((va, *b.get(k)?))).collect();
    if pairs.is_empty() {
        return Err(invalid(format!("no paired tasks between {model_a} and {model_b}")));
    }
    let diffs: Vec<f64> = pairs.iter().map(|(x, y)| x - y).collect();
    let col = |f: fn(&(f64, f64)) -> f64| median(&pairs.iter().map(f).collect::<Vec<_>>()).expect("non-empty");
    Ok(PairedTest {
        n_pairs: pairs.len(),
        median_diff: median(&diffs).expect("non-empty"),
        median_a: col(|p| p.0),
        median_b: col(|p| p.1),
        p_value: paired_permutation_p(&diffs, n_perm, seed),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    /// (knob value, median VPT) per grid point, sorted by knob.
    pub points: Vec<(f64, f64)>,
    /// Spearman correlation of the points; `None` when undefined (constant medians or knobs).
    pub rho: Option<f64>,
}

/// Spearman correlation between a numeric knob and median VPT of `model`, one point per
/// knob value. Records without a numeric `knob` are ignored.
pub fn vpt_trend(records: &[ResultRecord], model: &str, knob: &str) -> Result<Trend> {
    let mut by: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.model_id == model && r.is_ok()) {
        let (Some(x), Some(v)) = (r.kind_params.get(knob).and_then(|v| v.as_f64()), r.vpt()) else {
            continue;
        };
        by.entry(x.to_bits()).or_insert((x, Vec::new())).1.push(v);
    }
    let mut points: Vec<(f64, f64)> = by
        .into_values()
        .map(|(x, v)| (x, median(&v).expect("non-empty")))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    if points.len() < 3 {
        return Err(invalid(format!(
            "trend over `{knob}` needs at least 3 grid values, got {}",
            points.len()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let rho = match spearman(&xs, &ys) {
        Ok(r) => Some(r),
        Err(Error::UndefinedCorrelation(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Trend { points, rho })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcPair {
    pub system: String,
    pub ic_index: usize,
    /// Mean VPT over the task's channels.
    pub vpt: f64,
    pub relative_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcDependence {
    pub pairs: Vec<IcPair>,
    /// Pooled Spearman correlation; `None` when undefined (no rank variance).
    pub rho: Option<f64>,
    /// One-sided permutation p-value for `rho > 0`.
    pub p_value: Option<f64>,
}

/// One (VPT, relative density) pair per (system, initial condition) for `model`, and
/// their pooled rank correlation.
pub fn ic_dependence(records: &[ResultRecord], model: &str, n_perm: usize, seed: u64) -> Result<IcDependence> {
    let mut by: BTreeMap<(String, usize), (f64, Vec<f64>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.model_id == model && r.is_ok()) {
        let (Some(d), Some(v)) = (r.annotations.get("relative_density").and_then(|v| v.as_f64()), r.vpt()) else {
            continue;
        };
        by.entry((r.system.clone(), r.ic_index))
            .or_insert((d, Vec::new()))
            .1
            .push(v);
    }
    let pairs: Vec<IcPair> = by
        .into_iter()
        .map(|((system, ic_index), (relative_density, v))| IcPair {
            system,
            ic_index,
            vpt: v.iter().sum::<f64>() / v.len() as f64,
            relative_density,
        })
        .collect();
    if pairs.len() < 3 {
        return Err(invalid(format!(
            "need at least 3 density-annotated tasks, got {}",
            pairs.len()
        )));
    }
    let vpt: Vec<f64> = pairs.iter().map(|p| p.vpt).collect();
    let dens: Vec<f64> = pairs.iter().map(|p| p.relative_density).collect();
    let (rho, p_value) = match spearman_permutation_p(&dens, &vpt, n_perm, seed) {
        Ok((r, p)) => (Some(r), Some(p)),
        Err(Error::UndefinedCorrelation(_)) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(IcDependence { pairs, rho, p_value })
}

/// Kind-specific statistics for a finished run, one entry per model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub kind: ExperimentKind,
    /// Median VPT and sMAPE per model and knob setting.
    pub table: Vec<AggregateRow>,
    /// Context sweep: trend over `context_len`. Nonstationarity: trend over `1 - f_min`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub trends: BTreeMap<String, Trend>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ic_dependence: BTreeMap<String, IcDependence>,
    /// Problems computing a statistic, keyed by model.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

pub fn summarize(kind: ExperimentKind, records: &[ResultRecord], permutations: usize, seed: u64) -> ExperimentSummary {
    let keys: &[&str] = match kind {
        ExperimentKind::Baseline | ExperimentKind::IcDependence => &["model"],
        ExperimentKind::ContextSweep => &["model", "context_len"],
        ExperimentKind::KgramShuffle => &["model", "k", "condition"],
        ExperimentKind::Nonstationary => &["model", "f_min"],
    };
    let mut out = ExperimentSummary {
        kind,
        table: aggregate(records, keys, seed),
        trends: BTreeMap::new(),
        ic_dependence: BTreeMap::new(),
        notes: BTreeMap::new(),
    };
    let models: std::collections::BTreeSet<&str> = records.iter().map(|r| r.model_id.as_str()).collect();
    for m in models {
        match kind {
            ExperimentKind::ContextSweep => match vpt_trend(records, m, "context_len") {
                Ok(t) => drop(out.trends.insert(m.into(), t)),
                Err(e) => drop(out.notes.insert(m.into(), e.to_string())),
            },
            ExperimentKind::Nonstationary => match vpt_trend(records, m, "f_min") {
                Ok(t) => {
                    let mut points: Vec<(f64, f64)> = t.points.iter().map(|&(f, v)| (1.0 - f, v)).collect();
                    points.reverse();
                    out.trends.insert(
                        m.into(),
                        Trend {
                            points,
                            rho: t.rho.map(|r| -r),
                        },
                    );
                }
                Err(e) => drop(out.notes.insert(m.into(), e.to_string())),
            },
            ExperimentKind::IcDependence => match ic_dependence(records, m, permutations, seed) {
                Ok(d) => drop(out.ic_dependence.insert(m.into(), d)),
                Err(e) => drop(out.notes.insert(m.into(), e.to_string())),
            },
            _ => {}
        }
    }
    out
}
