//! Lookback selection on a train/validation split of each training context.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{forecast_multichannel, ChannelMode, Forecaster};
use crate::error::{invalid, Result};
use crate::metrics::smape_curve;
use crate::trajectory::Trajectory;

/// Candidate lookbacks, in Lyapunov times.
pub const LOOKBACK_GRID: [f64; 6] = [0.067, 0.167, 0.333, 0.5, 0.833, 1.0];

/// Default split of a 512-point training context into fit and validation parts.
pub const TRAIN_VAL_SPLIT: (usize, usize) = (435, 77);

/// Lag counts for a grid of Lyapunov-time fractions at `points_per_lyapunov` sampling.
pub fn lag_grid(grid: &[f64], points_per_lyapunov: usize) -> Vec<usize> {
    grid.iter()
        .map(|f| ((f * points_per_lyapunov as f64).round() as usize).max(1))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub fraction: f64,
    pub lookback: usize,
    /// Mean validation sMAPE; infinite when any fit failed.
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub fraction: f64,
    pub lookback: usize,
    pub table: Vec<TuneRow>,
}

/// Pick the lookback whose model has the lowest mean validation sMAPE across `series`.
///
/// `factory` builds a model for a lookback in points. Each series is cut into its first
/// `split.0` rows (context) and the following `split.1` rows (validation target); rows past
/// `split.0 + split.1` are never read. Ties go to the smaller lookback.
pub fn tune_lookback(
    factory: &(dyn Fn(usize) -> Box<dyn Forecaster> + Sync),
    series: &[Trajectory],
    split: (usize, usize),
    grid: &[f64],
    points_per_lyapunov: usize,
    mode: ChannelMode,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(invalid("lookback grid is empty"));
    }
    if series.is_empty() {
        return Err(invalid("no series to tune on"));
    }
    let (n_train, n_val) = split;
    if n_train < 2 || n_val == 0 {
        return Err(invalid("split needs >= 2 training and >= 1 validation points"));
    }
    if let Some(s) = series.iter().find(|s| s.len() < n_train + n_val) {
        return Err(invalid(format!("series of {} rows is shorter than the split", s.len())));
    }
    let lags = lag_grid(grid, points_per_lyapunov);
    let table: Vec<TuneRow> = grid
        .iter()
        .zip(&lags)
        .map(|(&fraction, &lookback)| {
            let model = factory(lookback);
            let scores: Vec<Result<f64>> = series
                .par_iter()
                .map(|s| validation_smape(model.as_ref(), s, n_train, n_val, mode))
                .collect();
            let mut total = 0.0;
            for r in &scores {
                match r {
                    Ok(v) => total += v,
                    Err(e) => {
                        return TuneRow {
                            fraction,
                            lookback,
                            score: f64::INFINITY,
                            error: Some(e.to_string()),
                        }
                    }
                }
            }
            TuneRow {
                fraction,
                lookback,
                score: total / scores.len() as f64,
                error: None,
            }
        })
        .collect();

    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        let b = &table[best];
        if row.score < b.score || (row.score == b.score && row.lookback < b.lookback) {
            best = i;
        }
    }
    Ok(TuneResult {
        fraction: table[best].fraction,
        lookback: table[best].lookback,
        table,
    })
}

fn validation_smape(
    model: &dyn Forecaster,
    series: &Trajectory,
    n_train: usize,
    n_val: usize,
    mode: ChannelMode,
) -> Result<f64> {
    let ctx = series.slice(0, n_train)?;
    let target = series.slice(n_train, n_train + n_val)?;
    let forecasts = forecast_multichannel(model, &ctx, n_val, mode)?;
    let mut total = 0.0;
    for (c, f) in forecasts.iter().enumerate() {
        let curve = smape_curve(&target.channel(c), &f.values, 1)?;
        total += curve.iter().sum::<f64>() / curve.len() as f64;
    }
    Ok(total / forecasts.len() as f64)
}
