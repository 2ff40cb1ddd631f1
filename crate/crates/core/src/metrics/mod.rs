//! Forecast scoring: pointwise error, valid prediction time, attractor geometry,
//! state-space divergence, context overlap and rank statistics.

pub mod dimension;
pub mod kl;
pub mod overlap;
pub mod pointwise;
pub mod stats;

use serde::{Deserialize, Serialize};

pub use dimension::{correlation_dimension, d_frac_error, DimensionConfig};
pub use kl::{kl_attractor, kl_monte_carlo, natural_measure_density, GaussianMixture, KlEstimate};
pub use overlap::{context_overlap, CenteredQuery, OverlapMatch, OverlapMode};
pub use pointwise::{smape_cumulative, smape_curve, smape_pointwise, valid_steps, vpt};
pub use stats::{
    bootstrap_median_se, fractional_ranks, median, paired_permutation_p, pearson, spearman, spearman_permutation_p,
};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    /// sMAPE threshold for VPT.
    pub vpt_epsilon: f64,
    pub gp_radius_percentiles: (f64, f64),
    pub gp_n_radii: usize,
    pub gp_max_pairs: usize,
    /// Advisory minimum cloud size; smaller clouds are still scored down to the hard floor of 50.
    pub gp_min_points: usize,
    pub kl_mc_samples: usize,
    /// Bandwidth floor, relative to the true trajectory's bounding-box diagonal.
    pub kl_bandwidth_floor: f64,
    pub overlap_min_len: usize,
    pub overlap_mode: OverlapMode,
    pub rng_seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        let gp = DimensionConfig::default();
        Self {
            vpt_epsilon: 30.0,
            gp_radius_percentiles: gp.radius_percentiles,
            gp_n_radii: gp.n_radii,
            gp_max_pairs: gp.max_pairs,
            gp_min_points: 1000,
            kl_mc_samples: 10_000,
            kl_bandwidth_floor: 1e-12,
            overlap_min_len: 30,
            overlap_mode: OverlapMode::Fixed,
            rng_seed: 0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.vpt_epsilon > 0.0 && self.vpt_epsilon < 200.0) {
            return Err(invalid("vpt_epsilon must lie in (0, 200)"));
        }
        let (lo, hi) = self.gp_radius_percentiles;
        if !(0.0 <= lo && lo < hi && hi <= 100.0) {
            return Err(invalid("gp_radius_percentiles must satisfy 0 <= low < high <= 100"));
        }
        if self.kl_mc_samples < 100 {
            return Err(invalid("kl_mc_samples must be >= 100"));
        }
        if !(self.kl_bandwidth_floor > 0.0) {
            return Err(invalid("kl_bandwidth_floor must be > 0"));
        }
        if self.overlap_min_len < 2 {
            return Err(invalid("overlap_min_len must be >= 2"));
        }
        Ok(())
    }

    pub fn dimension_config(&self, seed: u64) -> DimensionConfig {
        DimensionConfig {
            radius_percentiles: self.gp_radius_percentiles,
            n_radii: self.gp_n_radii,
            max_pairs: self.gp_max_pairs,
            seed,
        }
    }
}

/// Scores for one forecast. Quantities that are undefined for a given forecast
/// (e.g. overlap of a constant context) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub smape_curve: Vec<f64>,
    pub smape_mean: f64,
    pub vpt_lyap: f64,
    pub d_frac_pred: Option<f64>,
    pub d_frac_error: Option<f64>,
    pub d_stsp: Option<f64>,
    pub d_stsp_se: Option<f64>,
    pub context_overlap: Option<f64>,
}

/// Geometry scores of a joint (all-channel) forecast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorScores {
    pub d_frac_pred: Option<f64>,
    pub d_frac_error: Option<f64>,
    pub d_stsp: Option<f64>,
    pub d_stsp_se: Option<f64>,
}

/// Pointwise scores for one channel: sMAPE curve, VPT and context overlap.
pub fn score_channel(
    context: &[f64],
    truth: &[f64],
    pred: &[f64],
    dt_lyap: f64,
    cfg: &MetricConfig,
) -> Result<MetricReport> {
    let curve = smape_curve(truth, pred, 1)?;
    let smape_mean = curve.iter().sum::<f64>() / curve.len().max(1) as f64;
    let vpt_lyap = valid_steps(&curve, cfg.vpt_epsilon) as f64 * dt_lyap;
    let overlap = match context_overlap(context, cfg.overlap_min_len, cfg.overlap_mode) {
        Ok(m) => Some(m.value),
        Err(Error::UndefinedSimilarity(_)) | Err(Error::InvalidArgument(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricReport {
        smape_curve: curve,
        smape_mean,
        vpt_lyap,
        d_frac_pred: None,
        d_frac_error: None,
        d_stsp: None,
        d_stsp_se: None,
        context_overlap: overlap,
    })
}

/// Correlation dimension and state-space divergence of a joint forecast against the truth.
pub fn score_attractor(
    truth: &[f64],
    pred: &[f64],
    dim: usize,
    reference_dim: f64,
    cfg: &MetricConfig,
    seed: u64,
) -> Result<AttractorScores> {
    if truth.len() != pred.len() || dim == 0 || truth.len() % dim != 0 {
        return Err(invalid("attractor scoring needs matching row-major arrays"));
    }
    let n = truth.len() / dim;
    let (d_frac_pred, d_frac_error) = if n >= dimension::MIN_POINTS {
        let d = match correlation_dimension(pred, dim, &cfg.dimension_config(seed)) {
            Ok(d) => d,
            Err(Error::DegenerateGeometry(_)) => 0.0,
            Err(e) => return Err(e),
        };
        (Some(d), Some((d - reference_dim).abs()))
    } else {
        (None, None)
    };
    let (d_stsp, d_stsp_se) = if n >= 2 {
        let est = kl_attractor(truth, pred, dim, cfg.kl_mc_samples, cfg.kl_bandwidth_floor, seed)?;
        (Some(est.value), Some(est.std_error))
    } else {
        (None, None)
    };
    Ok(AttractorScores {
        d_frac_pred,
        d_frac_error,
        d_stsp,
        d_stsp_se,
    })
}

impl MetricReport {
    pub fn with_attractor(mut self, a: AttractorScores) -> Self {
        self.d_frac_pred = a.d_frac_pred;
        self.d_frac_error = a.d_frac_error;
        self.d_stsp = a.d_stsp;
        self.d_stsp_se = a.d_stsp_se;
        self
    }

    /// Checks the report's range invariants.
    pub fn validate(&self) -> Result<()> {
        if self.smape_curve.iter().any(|v| !(0.0..=200.0).contains(v)) {
            return Err(invalid("sMAPE value outside [0, 200]"));
        }
        if !(self.vpt_lyap >= 0.0) {
            return Err(invalid("negative VPT"));
        }
        if let (Some(d), Some(se)) = (self.d_stsp, self.d_stsp_se) {
            if d < -3.0 * se - 1e-12 {
                return Err(invalid("KL estimate below -3 standard errors"));
            }
        }
        if let Some(c) = self.context_overlap {
            if !(-1.0..=1.0).contains(&c) {
                return Err(invalid("overlap outside [-1, 1]"));
            }
        }
        Ok(())
    }
}
