//! Context manipulations used by the ablation experiments.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::trajectory::Trajectory;

/// Draws allowed before giving up on a differing penultimate block.
pub const MAX_SHUFFLE_DRAWS: usize = 1000;

/// Block boundaries counted from the end: every block has `k` points except a
/// shorter remainder at the start.
pub fn kgram_blocks(len: usize, k: usize) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut end = len;
    while end > 0 {
        let start = end.saturating_sub(k);
        blocks.push((start, end));
        end = start;
    }
    blocks.reverse();
    blocks
}

/// Concatenate the blocks of `kgram_blocks(context.len(), k)` in `order`.
pub fn permute_blocks(context: &[f64], k: usize, order: &[usize]) -> Result<Vec<f64>> {
    let blocks = kgram_blocks(context.len(), k);
    let mut seen = vec![false; blocks.len()];
    if order.len() != blocks.len()
        || order
            .iter()
            .any(|&i| i >= blocks.len() || std::mem::replace(&mut seen[i], true))
    {
        return Err(invalid("order is not a permutation of the blocks"));
    }
    Ok(order
        .iter()
        .flat_map(|&i| context[blocks[i].0..blocks[i].1].iter().copied())
        .collect())
}

/// Shuffle the length-`k` blocks of `context`, keeping the final block in place and
/// rejecting arrangements whose penultimate `k` points equal the original ones.
pub fn kgram_shuffle(context: &[f64], k: usize, seed: u64) -> Result<Vec<f64>> {
    let c = context.len();
    if k == 0 || 2 * k > c {
        return Err(invalid(format!("k = {k} must lie in [1, {}]", c / 2)));
    }
    let blocks = kgram_blocks(c, k);
    let movable = blocks.len() - 1;
    let penultimate = &context[c - 2 * k..c - k];
    let same = |b: (usize, usize)| {
        let s = &context[b.0..b.1];
        s.len() == k && s.iter().zip(penultimate).all(|(x, y)| x.to_bits() == y.to_bits())
    };
    if blocks[..movable].iter().all(|&b| same(b)) {
        return Err(Error::ShuffleImpossible(format!(
            "every movable {k}-block equals the penultimate block"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..blocks.len()).collect();
    for _ in 0..MAX_SHUFFLE_DRAWS {
        order[..movable].shuffle(&mut rng);
        let out = permute_blocks(context, k, &order)?;
        if out[c - 2 * k..c - k]
            .iter()
            .zip(penultimate)
            .any(|(x, y)| x.to_bits() != y.to_bits())
        {
            return Ok(out);
        }
    }
    Err(Error::ShuffleImpossible(format!(
        "no differing penultimate block after {MAX_SHUFFLE_DRAWS} draws"
    )))
}

/// Modulation factors `exp(t ln(f_min) / (T - 1))` for `t = 0..T`; the last is exactly `f_min`.
pub fn nonstationarity_factors(len: usize, f_min: f64) -> Result<Vec<f64>> {
    if !(f_min > 0.0 && f_min <= 1.0) {
        return Err(invalid(format!("f_min = {f_min} must lie in (0, 1]")));
    }
    if len <= 1 {
        return Ok(vec![1.0; len]);
    }
    let rate = f_min.ln() / (len - 1) as f64;
    let mut f: Vec<f64> = (0..len).map(|t| (t as f64 * rate).exp()).collect();
    f[len - 1] = f_min;
    Ok(f)
}

/// Exponentially damp a trajectory from factor 1 at the first sample to `f_min` at the last.
pub fn apply_nonstationarity(traj: &Trajectory, f_min: f64) -> Result<Trajectory> {
    let factors = nonstationarity_factors(traj.len(), f_min)?;
    let mut out = traj.clone();
    if f_min == 1.0 {
        return Ok(out);
    }
    let d = out.dim();
    for (row, f) in out.values_mut().chunks_exact_mut(d).zip(&factors) {
        for v in row {
            *v *= f;
        }
    }
    Ok(out)
}
