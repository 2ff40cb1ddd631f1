//! Explicit Runge-Kutta integration: adaptive Dormand-Prince 5(4) and fixed-step RK4.

use serde::{Deserialize, Serialize};

use super::spec::SystemSpec;
use crate::error::{invalid, Error, Result};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    AdaptiveRk45,
    FixedRk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest internal step and largest output spacing, time units.
    pub max_step: f64,
    pub scheme: Scheme,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 1.0,
            scheme: Scheme::AdaptiveRk45,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(invalid("integrator tolerances must be > 0"));
        }
        if !(self.max_step > 0.0) {
            return Err(invalid("max_step must be > 0"));
        }
        Ok(())
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }
}

/// States this large are treated as divergence.
const BLOWUP_NORM: f64 = 1e12;

// Dormand-Prince tableau (autonomous fields, so the c nodes are unused).
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b_hat
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Reusable stepper for `dx/dt = f(x)` on a state of fixed length.
pub struct Stepper<F> {
    rhs: F,
    cfg: IntegratorConfig,
    n: usize,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    next: Vec<f64>,
    h: Option<f64>,
    fsal_valid: bool,
}

impl<F: FnMut(&[f64], &mut [f64])> Stepper<F> {
    pub fn new(rhs: F, n: usize, cfg: IntegratorConfig) -> Self {
        Self {
            rhs,
            cfg,
            n,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            next: vec![0.0; n],
            h: None,
            fsal_valid: false,
        }
    }

    /// Advance `x` from `t` to `t + span` in place. The step-size history is kept
    /// across calls so repeated short advances stay cheap.
    pub fn advance(&mut self, x: &mut [f64], t: f64, span: f64) -> Result<()> {
        if span <= 0.0 {
            return Ok(());
        }
        match self.cfg.scheme {
            Scheme::FixedRk4 => self.advance_rk4(x, t, span),
            Scheme::AdaptiveRk45 => self.advance_dopri(x, t, span),
        }
    }

    /// Forget FSAL and step-size state; required after `x` is modified externally.
    pub fn reset(&mut self) {
        self.fsal_valid = false;
    }

    fn advance_rk4(&mut self, x: &mut [f64], t: f64, span: f64) -> Result<()> {
        let steps = (span / self.cfg.max_step).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let n = self.n;
        for s in 0..steps {
            let [k1, k2, k3, k4, ..] = &mut self.k;
            (self.rhs)(x, k1);
            for i in 0..n {
                self.tmp[i] = x[i] + 0.5 * h * k1[i];
            }
            (self.rhs)(&self.tmp, k2);
            for i in 0..n {
                self.tmp[i] = x[i] + 0.5 * h * k2[i];
            }
            (self.rhs)(&self.tmp, k3);
            for i in 0..n {
                self.tmp[i] = x[i] + h * k3[i];
            }
            (self.rhs)(&self.tmp, k4);
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            check_finite(x, t + (s as f64) * h)?;
        }
        self.fsal_valid = false;
        Ok(())
    }

    fn advance_dopri(&mut self, x: &mut [f64], t0: f64, span: f64) -> Result<()> {
        let n = self.n;
        let t_end = t0 + span;
        let mut t = t0;
        if !self.fsal_valid {
            (self.rhs)(x, &mut self.k[0]);
            self.fsal_valid = true;
        }
        let mut h = self.h.unwrap_or_else(|| self.initial_step(x)).min(self.cfg.max_step);
        let min_step = 1e-14 * (1.0 + t0.abs().max(t_end.abs()));
        loop {
            let remaining = t_end - t;
            if remaining <= min_step {
                break;
            }
            let last = h >= remaining;
            let h_try = if last { remaining } else { h };

            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let tmp = &mut self.tmp;
            for i in 0..n {
                tmp[i] = x[i] + h_try * A21 * k1[i];
            }
            (self.rhs)(tmp, k2);
            for i in 0..n {
                tmp[i] = x[i] + h_try * (A31 * k1[i] + A32 * k2[i]);
            }
            (self.rhs)(tmp, k3);
            for i in 0..n {
                tmp[i] = x[i] + h_try * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            (self.rhs)(tmp, k4);
            for i in 0..n {
                tmp[i] = x[i] + h_try * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            (self.rhs)(tmp, k5);
            for i in 0..n {
                tmp[i] = x[i] + h_try * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            (self.rhs)(tmp, k6);
            let next = &mut self.next;
            for i in 0..n {
                next[i] = x[i] + h_try * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
            }
            (self.rhs)(next, k7);

            let mut err = 0.0;
            for i in 0..n {
                let e = h_try * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.cfg.abs_tol + self.cfg.rel_tol * x[i].abs().max(next[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / n as f64).sqrt();

            if !err.is_finite() {
                // Non-finite trial step: shrink hard and retry.
                h = h_try * 0.1;
                if h < min_step {
                    return Err(Error::IntegrationBlowup { last_valid_time: t });
                }
                continue;
            }

            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                t = if last { t_end } else { t + h_try };
                x.copy_from_slice(next);
                k1.copy_from_slice(k7);
                check_finite(x, t)?;
                if !last {
                    h = (h_try * factor).min(self.cfg.max_step);
                }
                // Keep the unconstrained step for the next call.
                self.h = Some(if last { h.max(h_try) } else { h });
                if last {
                    break;
                }
            } else {
                h = h_try * factor.min(1.0);
                if h < min_step {
                    return Err(Error::StepSizeUnderflow(t));
                }
            }
        }
        Ok(())
    }

    fn initial_step(&mut self, x: &[f64]) -> f64 {
        let n = self.n as f64;
        let f0 = &self.k[0];
        let sc = |v: f64| self.cfg.abs_tol + self.cfg.rel_tol * v.abs();
        let d0 = (x.iter().map(|&v| (v / sc(v)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (x.iter().zip(f0).map(|(&v, &f)| (f / sc(v)).powi(2)).sum::<f64>() / n).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(self.cfg.max_step)
    }
}

fn check_finite(x: &[f64], t: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite() && v.abs() < BLOWUP_NORM) {
        Ok(())
    } else {
        Err(Error::IntegrationBlowup { last_valid_time: t })
    }
}

/// Integrate `rhs` from `x0`, recording the state every `dt_out` for `n_out` samples
/// (the first sample is `x0`). Returns the samples row-major.
pub fn integrate_fn<F: FnMut(&[f64], &mut [f64])>(
    rhs: F,
    x0: &[f64],
    dt_out: f64,
    n_out: usize,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = x0.len();
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(invalid("initial state must be finite"));
    }
    let mut out = Vec::with_capacity(n * n_out);
    out.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut stepper = Stepper::new(rhs, n, *cfg);
    for k in 1..n_out {
        // Absolute output times avoid drift from accumulated increments.
        let t_prev = (k - 1) as f64 * dt_out;
        let t_next = k as f64 * dt_out;
        stepper.advance(&mut x, t_prev, t_next - t_prev)?;
        out.extend_from_slice(&x);
    }
    Ok(out)
}

/// Integrate `spec` from `x0` for `duration` time units.
///
/// Samples are spaced `min(spec.integration_dt, cfg.max_step)`; the returned
/// trajectory's `dt_lyap` is that spacing times the system's Lyapunov exponent.
pub fn integrate(spec: &SystemSpec, x0: &[f64], duration: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    if x0.len() != spec.dim {
        return Err(invalid(format!(
            "initial state has dimension {}, {} expects {}",
            x0.len(),
            spec.name,
            spec.dim
        )));
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(invalid(format!("duration must be >= 0, got {duration}")));
    }
    let dt_out = spec.integration_dt.min(cfg.max_step);
    // A hair of slack so durations that are whole multiples of dt are not cut short.
    let n_out = (duration / dt_out * (1.0 + 1e-12)).floor() as usize + 1;
    let field = &spec.field;
    let values = integrate_fn(|x, dx| field.eval(x, dx), x0, dt_out, n_out, cfg)?;
    Ok(Trajectory::new(values, spec.dim, dt_out * spec.lyapunov_exponent)?.with_system(&spec.name))
}

/// Endpoint of an integration of `duration` time units (no intermediate samples).
pub fn integrate_endpoint(spec: &SystemSpec, x0: &[f64], duration: f64, cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if x0.len() != spec.dim {
        return Err(invalid("initial state dimension mismatch"));
    }
    let mut x = x0.to_vec();
    let field = &spec.field;
    let mut stepper = Stepper::new(|x: &[f64], dx: &mut [f64]| field.eval(x, dx), spec.dim, *cfg);
    stepper.advance(&mut x, 0.0, duration)?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::Registry;

    fn lorenz() -> SystemSpec {
        Registry::builtin().get("Lorenz").unwrap().clone()
    }

    #[test]
    fn zero_duration_is_identity() {
        let t = integrate(&lorenz(), &[1.0, 1.0, 1.0], 0.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.row(0), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn samples_respect_max_step() {
        let cfg = IntegratorConfig {
            max_step: 0.004,
            ..Default::default()
        };
        let t = integrate(&lorenz(), &[1.0, 1.0, 1.0], 1.0, &cfg).unwrap();
        assert!(t.dt_lyap / lorenz().lyapunov_exponent <= 0.004 + 1e-15);
        assert_eq!(t.row(0), &[1.0, 1.0, 1.0]);
        assert_eq!(t.len(), 251);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = integrate(&lorenz(), &[1.0, 1.0], 1.0, &IntegratorConfig::default());
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn blowup_reports_last_valid_time() {
        // x' = x^2 from x = 1 escapes at t = 1.
        let err = integrate_fn(|x, dx| dx[0] = x[0] * x[0], &[1.0], 0.1, 20, &Default::default());
        match err {
            Err(Error::IntegrationBlowup { last_valid_time }) => {
                assert!(last_valid_time > 0.9 && last_valid_time <= 1.0, "{last_valid_time}")
            }
            Err(Error::StepSizeUnderflow(t)) => assert!(t > 0.9 && t <= 1.0),
            other => panic!("expected blowup, got {other:?}"),
        }
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        for scheme in [Scheme::AdaptiveRk45, Scheme::FixedRk4] {
            let cfg = IntegratorConfig {
                scheme,
                max_step: 0.01,
                ..Default::default()
            };
            let out = integrate_fn(|x, dx| dx[0] = -x[0], &[1.0], 0.5, 5, &cfg).unwrap();
            for (k, v) in out.iter().enumerate() {
                assert!((v - (-0.5 * k as f64).exp()).abs() < 1e-9, "{scheme:?} {k}");
            }
        }
    }

    #[test]
    fn harmonic_invariant_is_conserved_over_100_periods() {
        // Closed form: the orbit is the unit circle.
        let osc = SystemSpec::harmonic_oscillator();
        let periods = 100.0;
        let t = integrate(&osc, &[1.0, 0.0], periods * std::f64::consts::TAU, &Default::default()).unwrap();
        let worst = t
            .rows()
            .map(|r| (r[0] * r[0] + r[1] * r[1] - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "radius drift {worst}");
        let end = t.last();
        let tf = (t.len() - 1) as f64 * osc.integration_dt;
        assert!((end[0] - tf.cos()).abs() < 1e-6 && (end[1] - tf.sin()).abs() < 1e-6);
    }

    #[test]
    fn lorenz_endpoint_self_convergence() {
        // Oracle: the same run at 100x tighter tolerance.
        let spec = lorenz();
        let x0 = [1.0, 1.0, 1.0];
        let tol = 1e-8;
        let base = IntegratorConfig::default().with_tolerances(tol, tol * 1e-3);
        let reference = integrate_endpoint(&spec, &x0, 10.0, &base.with_tolerances(tol / 100.0, tol * 1e-5)).unwrap();
        let halved = integrate_endpoint(&spec, &x0, 10.0, &base.with_tolerances(tol / 2.0, tol * 5e-4)).unwrap();
        // Chaotic amplification over 10 time units is ~e^9, so compare relative to the
        // amplified tolerance of the coarse run.
        let err = dist(&halved, &reference);
        let coarse_err = dist(&integrate_endpoint(&spec, &x0, 10.0, &base).unwrap(), &reference);
        assert!(
            err < coarse_err.max(1e-12) * 10.0,
            "halved {err} vs coarse {coarse_err}"
        );
        assert!(err < 10.0 * tol * (9.0f64).exp() * 40.0, "{err}");
    }

    #[test]
    fn short_horizon_errors_shrink_under_successive_halvings() {
        let spec = lorenz();
        let x0 = [1.0, 1.0, 1.0];
        let horizon = 0.5 * spec.lyapunov_time();
        let fine = IntegratorConfig::default().with_tolerances(1e-13, 1e-15);
        let reference = integrate_endpoint(&spec, &x0, horizon, &fine).unwrap();
        let errs: Vec<f64> = (0..4)
            .map(|h| {
                let tol = 1e-6 / 2f64.powi(h);
                let cfg = IntegratorConfig::default().with_tolerances(tol, tol * 1e-3);
                dist(&integrate_endpoint(&spec, &x0, horizon, &cfg).unwrap(), &reference)
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
        }
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }
}
