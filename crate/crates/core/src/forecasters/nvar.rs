//! Nonlinear vector autoregression: constant, linear and quadratic monomials of
//! lagged observations with a ridge-regressed one-step readout.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{timed, Forecast, ForecastTask, Forecaster};
use crate::error::{invalid, Error, Result};
use crate::trajectory::Trajectory;

/// Rollout values are clipped to the context mean plus or minus this many amplitudes.
pub const DIVERGENCE_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NvarConfig {
    pub n_lags: usize,
    pub max_order: u8,
    pub ridge: f64,
    pub stride: usize,
}

impl Default for NvarConfig {
    fn default() -> Self {
        Self {
            n_lags: 2,
            max_order: 2,
            ridge: 1e-4,
            stride: 1,
        }
    }
}

impl NvarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_lags == 0 {
            return Err(invalid("n_lags must be >= 1"));
        }
        if !(1..=2).contains(&self.max_order) {
            return Err(invalid("max_order must be 1 or 2"));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(invalid("ridge must be finite and >= 0"));
        }
        if self.stride == 0 {
            return Err(invalid("stride must be >= 1"));
        }
        Ok(())
    }

    /// Number of past rows a single feature vector reads.
    pub fn window(&self) -> usize {
        (self.n_lags - 1) * self.stride + 1
    }

    /// Feature count (excluding the intercept) for `dim` channels.
    pub fn n_features(&self, dim: usize) -> usize {
        let l = self.n_lags * dim;
        if self.max_order == 2 {
            l + l * (l + 1) / 2
        } else {
            l
        }
    }
}

/// A fitted readout. Immutable after fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct NvarModel {
    cfg: NvarConfig,
    dim: usize,
    /// `n_features x dim`.
    weights: DMatrix<f64>,
    intercept: Vec<f64>,
    train_rmse: f64,
    penalized_loss: f64,
}

/// Lag vector ending at row `t` of a row-major `dim`-column series, most recent first.
fn lag_vector(series: &[f64], dim: usize, t: usize, cfg: &NvarConfig, out: &mut Vec<f64>) {
    out.clear();
    for i in 0..cfg.n_lags {
        let r = t - i * cfg.stride;
        out.extend_from_slice(&series[r * dim..(r + 1) * dim]);
    }
}

fn features(lags: &[f64], order: u8, out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(lags);
    if order == 2 {
        for a in 0..lags.len() {
            for b in a..lags.len() {
                out.push(lags[a] * lags[b]);
            }
        }
    }
}

impl NvarModel {
    pub fn config(&self) -> &NvarConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn intercept(&self) -> &[f64] {
        &self.intercept
    }

    /// Root-mean-square one-step residual on the training data.
    pub fn train_rmse(&self) -> f64 {
        self.train_rmse
    }

    /// The minimized ridge objective `|y - Phi w|^2 + ridge |w|^2`.
    pub fn penalized_loss(&self) -> f64 {
        self.penalized_loss
    }

    fn predict_into(&self, feats: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            let w = self.weights.column(c);
            *o = self.intercept[c] + feats.iter().zip(w.iter()).map(|(f, w)| f * w).sum::<f64>();
        }
    }

    /// One-step prediction from the last `window()` rows of `history`.
    pub fn predict_next(&self, history: &[f64]) -> Result<Vec<f64>> {
        let rows = history.len() / self.dim;
        if history.len() % self.dim != 0 || rows < self.cfg.window() {
            return Err(invalid("history shorter than the model's lag window"));
        }
        let (mut lags, mut feats) = (Vec::new(), Vec::new());
        lag_vector(history, self.dim, rows - 1, &self.cfg, &mut lags);
        features(&lags, self.cfg.max_order, &mut feats);
        let mut out = vec![0.0; self.dim];
        self.predict_into(&feats, &mut out);
        Ok(out)
    }

    /// Autoregressive rollout of `horizon` rows after `context` (row-major).
    /// Returns the rollout and whether any step had to be clipped.
    pub fn rollout(&self, context: &[f64], horizon: usize) -> Result<(Vec<f64>, bool)> {
        let d = self.dim;
        if context.len() % d != 0 || context.len() / d < self.cfg.window() {
            return Err(invalid(format!(
                "context of {} rows is shorter than the lag window {}",
                context.len() / d,
                self.cfg.window()
            )));
        }
        let rows = context.len() / d;
        let mut lo = vec![0.0; d];
        let mut hi = vec![0.0; d];
        for c in 0..d {
            let ch: Vec<f64> = context.iter().skip(c).step_by(d).copied().collect();
            let mean = ch.iter().sum::<f64>() / rows as f64;
            let amp = ch.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
            let amp = if amp > 0.0 { amp } else { mean.abs().max(1.0) };
            lo[c] = mean - DIVERGENCE_FACTOR * amp;
            hi[c] = mean + DIVERGENCE_FACTOR * amp;
        }
        let keep = self.cfg.window();
        let mut hist: Vec<f64> = context[(rows - keep) * d..].to_vec();
        let mut out = Vec::with_capacity(horizon * d);
        let (mut lags, mut feats) = (Vec::new(), Vec::new());
        let mut next = vec![0.0; d];
        let mut diverged = false;
        for _ in 0..horizon {
            let r = hist.len() / d;
            lag_vector(&hist, d, r - 1, &self.cfg, &mut lags);
            features(&lags, self.cfg.max_order, &mut feats);
            self.predict_into(&feats, &mut next);
            for c in 0..d {
                let v = next[c];
                next[c] = if !v.is_finite() {
                    diverged = true;
                    hist[(r - 1) * d + c]
                } else if v < lo[c] || v > hi[c] {
                    diverged = true;
                    v.clamp(lo[c], hi[c])
                } else {
                    v
                };
            }
            out.extend_from_slice(&next);
            hist.extend_from_slice(&next);
            if hist.len() > 4 * keep * d {
                hist.drain(..hist.len() - keep * d);
            }
        }
        Ok((out, diverged))
    }
}

/// Fit a readout on a row-major `dim`-channel series.
pub fn nvar_fit_multivariate(series: &[f64], dim: usize, cfg: &NvarConfig) -> Result<NvarModel> {
    cfg.validate()?;
    if dim == 0 || series.len() % dim != 0 {
        return Err(invalid("series does not match dimension"));
    }
    let rows = series.len() / dim;
    if rows <= cfg.window() + 1 {
        return Err(invalid(format!(
            "training series of {rows} points is too short for {} lags",
            cfg.n_lags
        )));
    }
    let first = cfg.window() - 1;
    let n = rows - 1 - first;
    let p = cfg.n_features(dim);

    let mut phi = DMatrix::<f64>::zeros(n, p);
    let mut y = DMatrix::<f64>::zeros(n, dim);
    let (mut lags, mut feats) = (Vec::new(), Vec::new());
    for (i, t) in (first..rows - 1).enumerate() {
        lag_vector(series, dim, t, cfg, &mut lags);
        features(&lags, cfg.max_order, &mut feats);
        for (j, f) in feats.iter().enumerate() {
            phi[(i, j)] = *f;
        }
        for c in 0..dim {
            y[(i, c)] = series[(t + 1) * dim + c];
        }
    }

    // The intercept is left unpenalized by centering features and targets.
    let phi_mean: Vec<f64> = (0..p).map(|j| phi.column(j).mean()).collect();
    let y_mean: Vec<f64> = (0..dim).map(|c| y.column(c).mean()).collect();
    for j in 0..p {
        phi.column_mut(j).add_scalar_mut(-phi_mean[j]);
    }
    for c in 0..dim {
        y.column_mut(c).add_scalar_mut(-y_mean[c]);
    }

    let weights = if p <= n {
        let mut g = phi.tr_mul(&phi);
        for k in 0..p {
            g[(k, k)] += cfg.ridge;
        }
        let rhs = phi.tr_mul(&y);
        solve_spd(g, rhs)?
    } else {
        let mut k = &phi * phi.transpose();
        for i in 0..n {
            k[(i, i)] += cfg.ridge;
        }
        let a = solve_spd(k, y.clone())?;
        phi.tr_mul(&a)
    };
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::FitFailure("non-finite readout weights".into()));
    }

    let intercept: Vec<f64> = (0..dim)
        .map(|c| {
            y_mean[c]
                - phi_mean
                    .iter()
                    .zip(weights.column(c).iter())
                    .map(|(m, w)| m * w)
                    .sum::<f64>()
        })
        .collect();
    let resid = &y - &phi * &weights;
    let sse = resid.iter().map(|r| r * r).sum::<f64>();
    let train_rmse = (sse / resid.len() as f64).sqrt();
    let penalized_loss = sse + cfg.ridge * weights.iter().map(|w| w * w).sum::<f64>();

    Ok(NvarModel {
        cfg: *cfg,
        dim,
        weights,
        intercept,
        train_rmse,
        penalized_loss,
    })
}

fn solve_spd(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::FitFailure("normal equations are not positive definite".into()))?;
    Ok(chol.solve(&b))
}

/// Fit a single-channel readout.
pub fn nvar_fit(train: &[f64], cfg: &NvarConfig) -> Result<NvarModel> {
    nvar_fit_multivariate(train, 1, cfg)
}

/// Roll a single-channel model forward from the task's context.
pub fn nvar_forecast(model: &NvarModel, task: &ForecastTask) -> Result<Forecast> {
    task.validate()?;
    if model.dim != 1 {
        return Err(invalid("multivariate model used on a single-channel task"));
    }
    let (values, diverged) = model.rollout(&task.context, task.horizon)?;
    Ok(Forecast::new(values, "nvar")
        .with_meta("n_lags", model.cfg.n_lags)
        .with_meta("diverged", diverged))
}

/// Fits on each task's context, then rolls out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nvar {
    pub cfg: NvarConfig,
}

impl Nvar {
    pub fn new(cfg: NvarConfig) -> Self {
        Self { cfg }
    }
}

impl Forecaster for Nvar {
    fn id(&self) -> String {
        "nvar".into()
    }

    fn forecast(&self, task: &ForecastTask) -> Result<Forecast> {
        task.validate()?;
        let (model, fit_t) = timed(|| nvar_fit(&task.context, &self.cfg));
        let model = model?;
        let (f, inf_t) = timed(|| nvar_forecast(&model, task));
        let mut f = f?;
        f.fit_walltime = fit_t;
        f.inference_walltime = inf_t;
        Ok(f)
    }

    fn forecast_joint(&self, context: &Trajectory, horizon: usize) -> Result<Vec<Forecast>> {
        if horizon == 0 {
            return Err(invalid("horizon must be >= 1"));
        }
        let d = context.dim();
        let (model, fit_t) = timed(|| nvar_fit_multivariate(context.values(), d, &self.cfg));
        let model = model?;
        let (out, inf_t) = timed(|| model.rollout(context.values(), horizon));
        let (values, diverged) = out?;
        Ok((0..d)
            .map(|c| {
                let mut f = Forecast::new(values.iter().skip(c).step_by(d).copied().collect(), "nvar")
                    .with_meta("n_lags", self.cfg.n_lags)
                    .with_meta("diverged", diverged)
                    .with_meta("multivariate", true);
                f.fit_walltime = fit_t / d as f64;
                f.inference_walltime = inf_t / d as f64;
                f
            })
            .collect())
    }
}
