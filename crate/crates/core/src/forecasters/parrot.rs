//! Context parroting: find the earlier context window that best matches the most
//! recent motif and replay what followed it.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{naive_forecast, timed, Forecast, ForecastTask, Forecaster};
use crate::error::{invalid, Result};
use crate::metrics::CenteredQuery;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    #[default]
    Pearson,
    /// Zero-normalized Euclidean distance, reported as `1 - d^2 / 2m`.
    Zncc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParrotConfig {
    pub motif_len: usize,
    /// Outputs emitted per match; `None` replays a single match as far as the context allows.
    pub rematch_interval: Option<usize>,
    pub similarity: Similarity,
    /// Best scores below this mark the forecast as low confidence.
    pub confidence_threshold: f64,
}

impl Default for ParrotConfig {
    fn default() -> Self {
        Self {
            motif_len: 30,
            rematch_interval: None,
            similarity: Similarity::Pearson,
            confidence_threshold: 0.9,
        }
    }
}

impl ParrotConfig {
    pub fn validate(&self) -> Result<()> {
        if self.motif_len < 2 {
            return Err(invalid("motif_len must be >= 2"));
        }
        if self.rematch_interval == Some(0) {
            return Err(invalid("rematch_interval must be >= 1"));
        }
        Ok(())
    }
}

struct Zscored {
    z: Vec<f64>,
}

impl Zscored {
    fn new(w: &[f64]) -> Option<Self> {
        let m = w.len() as f64;
        let mean = w.iter().sum::<f64>() / m;
        let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m).sqrt();
        (sd > 0.0 && sd.is_finite()).then(|| Self {
            z: w.iter().map(|v| (v - mean) / sd).collect(),
        })
    }

    fn score(&self, other: &Zscored) -> f64 {
        let d2: f64 = self.z.iter().zip(&other.z).map(|(a, b)| (a - b).powi(2)).sum();
        1.0 - d2 / (2.0 * self.z.len() as f64)
    }
}

/// Best match for `query` among context windows starting at `0..=last_start`
/// (first maximum on ties). `None` when the query or every candidate is constant.
fn best_match(context: &[f64], query: &[f64], last_start: usize, sim: Similarity) -> Option<(usize, f64)> {
    let m = query.len();
    let mut best: Option<(usize, f64)> = None;
    let mut consider = |j: usize, s: f64| {
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((j, s));
        }
    };
    match sim {
        Similarity::Pearson => {
            let q = CenteredQuery::new(query)?;
            for j in 0..=last_start {
                if let Some(r) = q.pearson(&context[j..j + m]) {
                    consider(j, r);
                }
            }
        }
        Similarity::Zncc => {
            let q = Zscored::new(query)?;
            for j in 0..=last_start {
                if let Some(c) = Zscored::new(&context[j..j + m]) {
                    consider(j, q.score(&c));
                }
            }
        }
    }
    best
}

/// Replay the continuation of the best-matching earlier motif.
///
/// Candidate windows start at `j <= C - m - 1`, so at least one continuation point exists
/// and the query never matches itself. Past the end of a continuation (or every
/// `rematch_interval` outputs) the trailing `m` values of context plus output become the
/// new query, still matched against the context only.
pub fn parrot_forecast(task: &ForecastTask, cfg: &ParrotConfig) -> Result<Forecast> {
    task.validate()?;
    cfg.validate()?;
    let ctx = &task.context;
    let (c, m) = (ctx.len(), cfg.motif_len);
    if c < 2 * m {
        return Err(invalid(format!(
            "context of {c} points is shorter than twice the motif length {m}"
        )));
    }
    let last_start = c - m - 1;
    let interval = cfg.rematch_interval.unwrap_or(task.horizon);

    let mut series = ctx.clone();
    let mut offsets = Vec::new();
    let mut scores = Vec::new();
    while series.len() < c + task.horizon {
        let query = &series[series.len() - m..];
        let Some((j, score)) = best_match(ctx, query, last_start, cfg.similarity) else {
            if offsets.is_empty() {
                let f = naive_forecast(task)?;
                return Ok(Forecast::new(f.values, "parrot")
                    .with_meta("fallback", true)
                    .with_meta("low_confidence", true));
            }
            // A constant stretch of replayed output: hold its value.
            let last = *series.last().unwrap();
            series.resize(c + task.horizon, last);
            break;
        };
        offsets.push(j);
        scores.push(score);
        let available = c - (j + m);
        let remaining = c + task.horizon - series.len();
        let take = available.min(interval).min(remaining);
        series.extend_from_within(j + m..j + m + take);
    }
    let best = scores.first().copied().unwrap_or(f64::NAN);
    Ok(Forecast::new(series.split_off(c), "parrot")
        .with_meta("motif_len", m)
        .with_meta("offsets", json!(offsets))
        .with_meta("scores", json!(scores))
        .with_meta("fallback", false)
        .with_meta("low_confidence", !(best >= cfg.confidence_threshold)))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Parrot {
    pub cfg: ParrotConfig,
}

impl Parrot {
    pub fn new(cfg: ParrotConfig) -> Self {
        Self { cfg }
    }
}

impl Forecaster for Parrot {
    fn id(&self) -> String {
        "parrot".into()
    }

    /// Short contexts shrink the motif to half the context length; contexts too short for
    /// a two-point motif fall back to the naive forecast.
    fn forecast(&self, task: &ForecastTask) -> Result<Forecast> {
        if task.context.len() < 4 {
            task.validate()?;
            let f = naive_forecast(task)?;
            return Ok(Forecast {
                model_id: "parrot".into(),
                ..f
            }
            .with_meta("fallback", true)
            .with_meta("low_confidence", true));
        }
        let mut cfg = self.cfg;
        cfg.motif_len = cfg.motif_len.min(task.context.len() / 2).max(2);
        let (f, t) = timed(|| parrot_forecast(task, &cfg));
        let mut f = f?;
        f.inference_walltime = t;
        Ok(f)
    }
}
