//! Grassberger-Procaccia correlation dimension.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Point clouds smaller than this are rejected outright.
pub const MIN_POINTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionConfig {
    /// Pairwise-distance percentiles bounding the scaling window.
    pub radius_percentiles: (f64, f64),
    pub n_radii: usize,
    /// Pair-count cap; larger clouds use a seeded random subset of pairs.
    pub max_pairs: usize,
    pub seed: u64,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        Self {
            radius_percentiles: (0.5, 10.0),
            n_radii: 20,
            max_pairs: 4_000_000,
            seed: 0,
        }
    }
}

/// Correlation dimension of `points` (row-major, `dim` columns): the least-squares
/// slope of `log C(r)` against `log r`, where `C(r)` is the fraction of point pairs
/// closer than `r`, over log-spaced radii between the configured distance percentiles.
pub fn correlation_dimension(points: &[f64], dim: usize, cfg: &DimensionConfig) -> Result<f64> {
    if dim == 0 || points.len() % dim != 0 {
        return Err(invalid("point array does not match dimension"));
    }
    let n = points.len() / dim;
    if n < MIN_POINTS {
        return Err(invalid(format!(
            "correlation dimension needs >= {MIN_POINTS} points, got {n}"
        )));
    }
    let (lo_pct, hi_pct) = cfg.radius_percentiles;
    if !(0.0 <= lo_pct && lo_pct < hi_pct && hi_pct <= 100.0) || cfg.n_radii < 2 {
        return Err(invalid("bad radius window"));
    }

    let mut dists = pair_distances(points, dim, cfg.max_pairs, cfg.seed);
    dists.sort_unstable_by(f64::total_cmp);
    let total = dists.len() as f64;
    let positive = dists.partition_point(|&d| d <= 0.0);
    if positive == dists.len() {
        return Err(Error::DegenerateGeometry("all points coincide".into()));
    }

    let pick = |pct: f64| {
        let idx = ((pct / 100.0) * (dists.len() - 1) as f64).round() as usize;
        dists[idx.max(positive).min(dists.len() - 1)]
    };
    let (r_lo, r_hi) = (pick(lo_pct), pick(hi_pct));
    if !(r_hi > r_lo) {
        return Err(Error::DegenerateGeometry("empty scaling window".into()));
    }

    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let (l0, l1) = (r_lo.ln(), r_hi.ln());
    for k in 0..cfg.n_radii {
        let lr = l0 + (l1 - l0) * k as f64 / (cfg.n_radii - 1) as f64;
        let r = lr.exp();
        let count = dists.partition_point(|&d| d < r);
        if count > 0 {
            xs.push(lr);
            ys.push((count as f64 / total).ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateGeometry("too few populated radii".into()));
    }
    Ok(least_squares_slope(&xs, &ys))
}

/// Pairwise Euclidean distances, all `i < j` pairs or a seeded sample of `max_pairs`.
fn pair_distances(points: &[f64], dim: usize, max_pairs: usize, seed: u64) -> Vec<f64> {
    let n = points.len() / dim;
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let n_pairs = n * (n - 1) / 2;
    if n_pairs <= max_pairs {
        (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (i + 1..n).map(move |j| dist(row(i), row(j))))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..max_pairs)
            .map(|_| {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                dist(row(i), row(j))
            })
            .collect()
    }
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Root-mean-square error of per-cloud correlation dimensions against `reference`.
/// Clouds with degenerate geometry (e.g. a constant forecast) count as dimension 0.
pub fn d_frac_error(clouds: &[(&[f64], usize)], reference: f64, cfg: &DimensionConfig) -> Result<f64> {
    if clouds.is_empty() {
        return Err(invalid("no forecast clouds"));
    }
    let mut sq = 0.0;
    for &(pts, dim) in clouds {
        let d = match correlation_dimension(pts, dim, cfg) {
            Ok(d) => d,
            Err(Error::DegenerateGeometry(_)) => 0.0,
            Err(e) => return Err(e),
        };
        sq += (d - reference).powi(2);
    }
    Ok((sq / clouds.len() as f64).sqrt())
}
