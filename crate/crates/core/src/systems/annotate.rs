//! Self-annotation of registry entries: largest Lyapunov exponent and
//! reference correlation dimension, measured rather than taken on trust.

use serde::{Deserialize, Serialize};

use super::generate_trajectory;
use super::integrate::{integrate_endpoint, IntegratorConfig};
use super::lyapunov::estimate_lyapunov;
use super::resample::POINTS_PER_LYAPUNOV;
use super::spec::SystemSpec;
use crate::error::Result;
use crate::metrics::dimension::{correlation_dimension, DimensionConfig};

/// Orbit lengths used for annotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationConfig {
    /// Benettin orbit length, in Lyapunov times of the current annotation.
    pub lyapunov_horizon: f64,
    /// Samples in the correlation-dimension orbit.
    pub dimension_points: usize,
    pub seed: u64,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        Self {
            lyapunov_horizon: 2000.0,
            dimension_points: 50_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub lyapunov_exponent: f64,
    pub lyapunov_std_error: f64,
    pub fractal_dim: f64,
}

/// Measure `spec`'s largest exponent and the correlation dimension of a long
/// on-attractor orbit sampled at the default granularity.
pub fn annotate(spec: &SystemSpec, integ: &IntegratorConfig, cfg: &AnnotationConfig) -> Result<Annotation> {
    let est = estimate_lyapunov(spec, integ, cfg.lyapunov_horizon * spec.lyapunov_time(), cfg.seed)?;
    let x0 = integrate_endpoint(spec, &spec.initial_state, spec.burn_in_time, integ)?;
    let orbit = generate_trajectory(spec, &x0, cfg.dimension_points, POINTS_PER_LYAPUNOV, integ)?;
    let dcfg = DimensionConfig {
        seed: cfg.seed,
        ..Default::default()
    };
    let fractal_dim = correlation_dimension(orbit.values(), spec.dim, &dcfg)?;
    Ok(Annotation {
        lyapunov_exponent: est.exponent,
        lyapunov_std_error: est.std_error,
        fractal_dim,
    })
}
