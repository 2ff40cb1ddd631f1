//! Chaotic flows: definitions, integration, Lyapunov exponents, and
//! benchmark-ready trajectories.

mod annotate;
mod field;
mod integrate;
mod lyapunov;
mod resample;
mod spec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use annotate::{annotate, Annotation, AnnotationConfig};
pub use field::{PolyTerm, VectorField};
pub use integrate::{integrate, integrate_endpoint, integrate_fn, IntegratorConfig, Scheme, Stepper};
pub use lyapunov::{estimate_lyapunov, LyapunovEstimate};
pub use resample::{resample, POINTS_PER_LYAPUNOV};
pub use spec::{Registry, SystemDef, SystemSpec, DEFAULT_BURN_IN_LYAP};

use crate::error::{invalid, Result};
use crate::trajectory::Trajectory;

/// `dx/dt` of `spec` at `state`.
pub fn vector_field(spec: &SystemSpec, state: &[f64]) -> Result<Vec<f64>> {
    if state.len() != spec.dim {
        return Err(invalid(format!(
            "state has dimension {}, {} expects {}",
            state.len(),
            spec.name,
            spec.dim
        )));
    }
    let mut out = vec![0.0; spec.dim];
    spec.field.eval(state, &mut out);
    Ok(out)
}

/// Relative size of the seed perturbation, as a fraction of attractor extent per axis.
const SEED_NOISE: f64 = 0.01;

/// Per-axis extent of the attractor, from a 10 Lyapunov-time orbit after burn-in.
pub fn attractor_extent(spec: &SystemSpec, cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    let start = integrate_endpoint(spec, &spec.initial_state, spec.burn_in_time, cfg)?;
    let orbit = integrate(spec, &start, 10.0 * spec.lyapunov_time(), cfg)?;
    Ok(orbit.bounds().into_iter().map(|(lo, hi)| hi - lo).collect())
}

/// Draw `n` on-attractor states: the canonical point is perturbed by uniform noise of
/// 1% of the attractor extent and then integrated through the burn-in period.
pub fn sample_initial_conditions(
    spec: &SystemSpec,
    n: usize,
    cfg: &IntegratorConfig,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(invalid("need at least one initial condition"));
    }
    let extent = attractor_extent(spec, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            spec.initial_state
                .iter()
                .zip(&extent)
                .map(|(&x, &e)| x + SEED_NOISE * e * rng.gen_range(-1.0..=1.0))
                .collect()
        })
        .collect();
    seeds
        .iter()
        .map(|x0| integrate_endpoint(spec, x0, spec.burn_in_time, cfg))
        .collect()
}

/// An on-attractor trajectory of exactly `len` samples at `points_per_lyapunov`
/// granularity, starting from `x0`.
pub fn generate_trajectory(
    spec: &SystemSpec,
    x0: &[f64],
    len: usize,
    points_per_lyapunov: usize,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if len == 0 {
        return Err(invalid("trajectory length must be >= 1"));
    }
    let duration = (len - 1) as f64 / points_per_lyapunov as f64 * spec.lyapunov_time();
    // Pad by a few raw steps so the cubic stencil never runs short at the end.
    let raw = integrate(spec, x0, duration + 4.0 * spec.integration_dt, cfg)?;
    let fine = resample(&raw, points_per_lyapunov)?;
    fine.slice(0, len)
}
