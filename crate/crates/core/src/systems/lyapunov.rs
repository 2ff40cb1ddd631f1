//! Largest Lyapunov exponent by tangent-vector renormalization (Benettin).
//!
//! The state and one tangent vector are integrated together; the tangent
//! dynamics `v' = J(x) v` use a central-difference directional derivative of
//! the vector field, so any registered field works without a hand-written
//! Jacobian. The tangent vector is renormalized at fixed intervals and the
//! accumulated log stretch divided by elapsed time is the estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::integrate::{integrate_endpoint, IntegratorConfig, Stepper};
use super::spec::SystemSpec;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Estimated largest exponent, 1/time.
    pub exponent: f64,
    /// Standard error from the spread of per-block estimates.
    pub std_error: f64,
}

const N_BLOCKS: usize = 10;
/// Fraction of the horizon spent aligning the tangent vector before accumulating.
const ALIGN_FRACTION: f64 = 0.02;

/// Estimate the largest Lyapunov exponent of `spec` along an orbit of `horizon` time units.
///
/// The orbit starts from the system's canonical state after its burn-in, nudged by
/// a seeded perturbation; the initial tangent direction is also drawn from the seed.
pub fn estimate_lyapunov(
    spec: &SystemSpec,
    cfg: &IntegratorConfig,
    horizon: f64,
    seed: u64,
) -> Result<LyapunovEstimate> {
    let tau_guess = spec.lyapunov_time();
    if !(horizon >= 100.0 * tau_guess) {
        return Err(invalid(format!(
            "horizon {horizon} is shorter than 100 Lyapunov times ({})",
            100.0 * tau_guess
        )));
    }
    let n = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<f64> = spec
        .initial_state
        .iter()
        .map(|&v| v + 1e-3 * (rng.gen::<f64>() - 0.5) * (1.0 + v.abs()))
        .collect();
    let start = integrate_endpoint(spec, &x0, spec.burn_in_time, cfg)?;

    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    normalize(&mut v);
    let mut state = start;
    state.extend_from_slice(&v);

    let field = &spec.field;
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    let tangent = move |s: &[f64], ds: &mut [f64]| {
        let (x, v) = s.split_at(n);
        let (dx, dv) = ds.split_at_mut(n);
        field.eval(x, dx);
        let vnorm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            dv.iter_mut().for_each(|d| *d = 0.0);
            return;
        }
        let xnorm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        let eps = 1e-6 * (1.0 + xnorm) / vnorm;
        for i in 0..n {
            plus[i] = x[i] + eps * v[i];
            minus[i] = x[i] - eps * v[i];
        }
        field.eval(&plus, &mut fp);
        field.eval(&minus, &mut fm);
        for i in 0..n {
            dv[i] = (fp[i] - fm[i]) / (2.0 * eps);
        }
    };

    let interval = (0.1 * tau_guess).clamp(0.01, 1.0);
    let align_steps = ((ALIGN_FRACTION * horizon) / interval).ceil() as usize;
    let total_steps = (horizon / interval).floor() as usize;
    let measure_steps = total_steps.saturating_sub(align_steps);
    if measure_steps < N_BLOCKS {
        return Err(invalid("horizon too short for block statistics"));
    }
    let mut stepper = Stepper::new(tangent, 2 * n, *cfg);

    let mut log_stretch = Vec::with_capacity(measure_steps);
    for step in 0..total_steps {
        let t = step as f64 * interval;
        stepper.advance(&mut state, t, interval)?;
        let norm = state[n..].iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::EstimationFailure(format!(
                "tangent vector degenerated at t = {t}"
            )));
        }
        state[n..].iter_mut().for_each(|a| *a /= norm);
        stepper.reset();
        if step >= align_steps {
            log_stretch.push(norm.ln());
        }
    }

    let measured_time = log_stretch.len() as f64 * interval;
    let exponent = log_stretch.iter().sum::<f64>() / measured_time;

    let block = log_stretch.len() / N_BLOCKS;
    let block_est: Vec<f64> = log_stretch
        .chunks_exact(block)
        .take(N_BLOCKS)
        .map(|c| c.iter().sum::<f64>() / (block as f64 * interval))
        .collect();
    let mean = block_est.iter().sum::<f64>() / N_BLOCKS as f64;
    let var = block_est.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (N_BLOCKS - 1) as f64;
    let std_error = (var / N_BLOCKS as f64).sqrt();

    // Convergence: the running estimate over the last quarter must settle.
    let mut cum = 0.0;
    let quarter = log_stretch.len() * 3 / 4;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, l) in log_stretch.iter().enumerate() {
        cum += l;
        if i >= quarter {
            let running = cum / ((i + 1) as f64 * interval);
            lo = lo.min(running);
            hi = hi.max(running);
        }
    }
    let tolerance = 0.1 * exponent.abs() + 0.02;
    if hi - lo > tolerance {
        return Err(Error::EstimationFailure(format!(
            "running estimate spans [{lo:.4}, {hi:.4}] over the final quarter"
        )));
    }
    Ok(LyapunovEstimate { exponent, std_error })
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= n);
}
