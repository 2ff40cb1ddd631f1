//! Gaussian-mixture attractor densities and their Monte Carlo KL divergence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trajectory::Trajectory;

/// Equal-weight mixture of isotropic Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    means: Vec<f64>,
    sigmas: Vec<f64>,
    dim: usize,
}

impl GaussianMixture {
    pub fn new(means: Vec<f64>, sigmas: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || means.len() != sigmas.len() * dim || sigmas.is_empty() {
            return Err(invalid("mixture means and sigmas disagree in shape"));
        }
        if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid("mixture sigmas must be positive"));
        }
        Ok(Self { means, sigmas, dim })
    }

    /// One component per sample with `sigma_t = |x_t - x_{t-1}|`, the first component
    /// copying the second and every width floored at `floor`.
    pub fn from_points(points: &[f64], dim: usize, floor: f64) -> Result<Self> {
        if dim == 0 || points.len() % dim != 0 {
            return Err(invalid("point array does not match dimension"));
        }
        let n = points.len() / dim;
        if n < 2 {
            return Err(invalid("need at least two points for step-size bandwidths"));
        }
        let floor = floor.max(f64::MIN_POSITIVE);
        let mut sigmas = Vec::with_capacity(n);
        sigmas.push(0.0);
        for t in 1..n {
            let a = &points[(t - 1) * dim..t * dim];
            let b = &points[t * dim..(t + 1) * dim];
            let s = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            sigmas.push(s.max(floor));
        }
        sigmas[0] = sigmas[1];
        Self::new(points.to_vec(), sigmas, dim)
    }

    pub fn from_trajectory(traj: &Trajectory, floor: f64) -> Result<Self> {
        Self::from_points(traj.values(), traj.dim(), floor)
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `log p(x)`, evaluated with log-sum-exp.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dim as f64;
        let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let mut max = f64::NEG_INFINITY;
        let mut terms = Vec::with_capacity(self.len());
        for (mu, &s) in self.means.chunks_exact(self.dim).zip(&self.sigmas) {
            let r2: f64 = mu.iter().zip(x).map(|(m, v)| (v - m).powi(2)).sum();
            let lt = -0.5 * r2 / (s * s) - d * (s.ln() + half_log_2pi);
            max = max.max(lt);
            terms.push(lt);
        }
        if max == f64::NEG_INFINITY {
            return max;
        }
        let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
        max + sum.ln() - (self.len() as f64).ln()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// Draw one sample: a uniformly chosen component plus isotropic noise.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let k = rng.gen_range(0..self.len());
        let s = self.sigmas[k];
        self.means[k * self.dim..(k + 1) * self.dim]
            .iter()
            .map(|&m| m + s * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    /// Monte Carlo estimate of `KL(p || q)`, nats.
    pub value: f64,
    pub std_error: f64,
}

/// `KL(p || q)` estimated from `n` seeded samples of `p`.
pub fn kl_monte_carlo(p: &GaussianMixture, q: &GaussianMixture, n: usize, seed: u64) -> Result<KlEstimate> {
    if p.dim() != q.dim() {
        return Err(invalid("mixtures live in different dimensions"));
    }
    if n < 2 {
        return Err(invalid("need at least two Monte Carlo samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<f64>> = (0..n).map(|_| p.sample(&mut rng)).collect();
    // Evaluated in parallel, summed sequentially so the result is order-independent.
    let ratios: Vec<f64> = samples
        .par_iter()
        .map(|x| p.log_density(x) - q.log_density(x))
        .collect();
    if let Some(bad) = ratios.iter().find(|r| !r.is_finite()) {
        return Err(Error::NumericFailure(format!(
            "log density ratio {bad}; check bandwidth floor"
        )));
    }
    let mean = ratios.iter().sum::<f64>() / n as f64;
    let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(KlEstimate {
        value: mean,
        std_error: (var / n as f64).sqrt(),
    })
}

/// State-space divergence between a true and a predicted trajectory.
///
/// Bandwidth floors are `floor_rel` times the bounding-box diagonal of the true trajectory.
pub fn kl_attractor(
    truth: &[f64],
    pred: &[f64],
    dim: usize,
    n_samples: usize,
    floor_rel: f64,
    seed: u64,
) -> Result<KlEstimate> {
    if truth.len() < 2 * dim || pred.len() < 2 * dim {
        return Err(invalid("both trajectories need at least two samples"));
    }
    let floor = floor_rel * extent(truth, dim);
    let p = GaussianMixture::from_points(truth, dim, floor)?;
    let q = GaussianMixture::from_points(pred, dim, floor)?;
    kl_monte_carlo(&p, &q, n_samples, seed)
}

/// Natural-measure density estimate of `attractor` (row-major, `dim` columns) at `query`,
/// using the same step-size bandwidth mixture as [`kl_attractor`].
pub fn natural_measure_density(attractor: &[f64], dim: usize, query: &[f64], floor_rel: f64) -> Result<f64> {
    if query.len() != dim {
        return Err(invalid("query dimension mismatch"));
    }
    let mix = GaussianMixture::from_points(attractor, dim, floor_rel * extent(attractor, dim))?;
    Ok(mix.density(query))
}

pub(crate) fn extent(points: &[f64], dim: usize) -> f64 {
    (0..dim)
        .map(|d| {
            let (lo, hi) = points
                .iter()
                .skip(d)
                .step_by(dim)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            (hi - lo).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}
