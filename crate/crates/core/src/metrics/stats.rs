//! Rank correlation and the small amount of resampling statistics the
//! experiment summaries need.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Fractional ranks (1-based); tied values share the average of their ranks.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(invalid("pearson needs equal, non-empty inputs"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank-order correlation.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid("spearman inputs differ in length"));
    }
    if a.len() < 3 {
        return Err(invalid("spearman needs at least three pairs"));
    }
    pearson(&fractional_ranks(a), &fractional_ranks(b))
}

/// One-sided permutation p-value for `spearman(a, b) >= observed`, with the
/// `(hits + 1) / (n + 1)` correction.
pub fn spearman_permutation_p(a: &[f64], b: &[f64], n_perm: usize, seed: u64) -> Result<(f64, f64)> {
    let ra = fractional_ranks(a);
    let rb = fractional_ranks(b);
    let observed = pearson(&ra, &rb)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = rb.clone();
    let mut hits = 0usize;
    for _ in 0..n_perm {
        shuffled.shuffle(&mut rng);
        if pearson(&ra, &shuffled)? >= observed {
            hits += 1;
        }
    }
    Ok((observed, (hits + 1) as f64 / (n_perm + 1) as f64))
}

/// One-sided sign-flip permutation test that the mean of paired differences is positive.
pub fn paired_permutation_p(diffs: &[f64], n_perm: usize, seed: u64) -> f64 {
    let n = diffs.len() as f64;
    let observed = diffs.iter().sum::<f64>() / n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..n_perm {
        let m: f64 = diffs
            .iter()
            .map(|&d| if rng.gen::<bool>() { d } else { -d })
            .sum::<f64>()
            / n;
        if m >= observed {
            hits += 1;
        }
    }
    (hits + 1) as f64 / (n_perm + 1) as f64
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Bootstrap standard error of the median.
pub fn bootstrap_median_se(values: &[f64], resamples: usize, seed: u64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    if values.len() == 1 {
        return Some(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; values.len()];
    let meds: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = values[rng.gen_range(0..values.len())];
            }
            median(&buf).unwrap()
        })
        .collect();
    let mean = meds.iter().sum::<f64>() / meds.len() as f64;
    let var = meds.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (meds.len() - 1).max(1) as f64;
    Some(var.sqrt())
}
