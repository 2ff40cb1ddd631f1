//! Brute-force reference implementations and synthetic data shared by the
//! integration tests and the acceptance suite.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Ten registry flows used by the desk-scale experiments.
pub const DESK_SYSTEMS: [&str; 10] = [
    "Lorenz",
    "Rossler",
    "Chen",
    "LuChen",
    "SprottB",
    "SprottD",
    "Rucklidge",
    "Hadley",
    "Dadras",
    "Arneodo",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Values drawn so that zeros, exact ties and sign changes all occur.
pub fn awkward_values(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| match rng.gen_range(0..6) {
            0 => 0.0,
            1 => rng.gen_range(-3..=3) as f64,
            _ => rng.gen_range(-10.0..10.0),
        })
        .collect()
}

/// Per-step sMAPE written straight from the formula, `H x dim` row-major.
pub fn smape_brute(truth: &[f64], pred: &[f64], dim: usize) -> Vec<f64> {
    let h = truth.len() / dim;
    let mut out = Vec::with_capacity(h);
    for t in 0..h {
        let mut total = 0.0;
        for d in 0..dim {
            let x = truth[t * dim + d];
            let y = pred[t * dim + d];
            if x == 0.0 && y == 0.0 {
                continue;
            }
            total += 2.0 * 100.0 * (x - y).abs() / (x.abs() + y.abs());
        }
        out.push(total / dim as f64);
    }
    out
}

/// Largest `t_f` such that every step before it has sMAPE below `eps`, times `dt`.
pub fn vpt_brute(truth: &[f64], pred: &[f64], dim: usize, eps: f64, dt: f64) -> f64 {
    let curve = smape_brute(truth, pred, dim);
    let mut best = 0;
    for tf in 0..=curve.len() {
        if (0..tf).all(|t| curve[t] < eps) {
            best = tf;
        }
    }
    best as f64 * dt
}

/// Two-pass Pearson correlation; `None` when either side is constant.
pub fn pearson_brute(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va.sqrt() * vb.sqrt()))
}

/// Maximum correlation of the final `m` points with every earlier disjoint window,
/// scanning every placement; first offset wins ties.
pub fn overlap_brute(context: &[f64], m: usize) -> Option<(usize, f64)> {
    let c = context.len();
    let query = &context[c - m..];
    let mut best: Option<(usize, f64)> = None;
    for j in 0..=c - 2 * m {
        if let Some(r) = pearson_brute(query, &context[j..j + m]) {
            if best.map_or(true, |(_, b)| r > b) {
                best = Some((j, r));
            }
        }
    }
    best
}

/// Rank of each value by counting: one plus the number below plus half the other ties.
pub fn ranks_brute(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let below = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_brute(a: &[f64], b: &[f64]) -> Option<f64> {
    pearson_brute(&ranks_brute(a), &ranks_brute(b))
}

/// `n` points uniform on a segment embedded in 3D.
pub fn line_3d(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n)
        .flat_map(|_| {
            let s: f64 = r.gen();
            [1.0 + 2.0 * s, -0.5 + s, 3.0 * s]
        })
        .collect()
}

/// `n` points uniform on a tilted unit square embedded in 3D.
pub fn square_3d(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n)
        .flat_map(|_| {
            let (u, v): (f64, f64) = (r.gen(), r.gen());
            [u, v, 0.5 * u - 0.3 * v]
        })
        .collect()
}

/// `n` points of the middle-thirds Cantor set from `depth` random ternary digits in {0, 2}.
pub fn cantor(n: usize, depth: u32, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            (1..=depth)
                .map(|k| if r.gen::<bool>() { 2.0 } else { 0.0 } / 3f64.powi(k as i32))
                .sum()
        })
        .collect()
}

pub fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

pub fn mixture_pdf(x: f64, means: &[f64], sigmas: &[f64]) -> f64 {
    means
        .iter()
        .zip(sigmas)
        .map(|(&m, &s)| normal_pdf(x, m, s))
        .sum::<f64>()
        / means.len() as f64
}

/// `KL(p || q)` for equal-weight 1D mixtures by composite Simpson quadrature.
pub fn kl_quadrature(p: (&[f64], &[f64]), q: (&[f64], &[f64])) -> f64 {
    let all_m = p.0.iter().chain(q.0);
    let max_s = p.1.iter().chain(q.1).fold(0.0f64, |a, &b| a.max(b));
    let lo = all_m.clone().fold(f64::INFINITY, |a, &b| a.min(b)) - 12.0 * max_s;
    let hi = all_m.fold(f64::NEG_INFINITY, |a, &b| a.max(b)) + 12.0 * max_s;
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    let f = |x: f64| {
        let a = mixture_pdf(x, p.0, p.1);
        if a == 0.0 {
            0.0
        } else {
            a * (a / mixture_pdf(x, q.0, q.1)).ln()
        }
    };
    let mut total = f(lo) + f(hi);
    for i in 1..n {
        total += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    total * h / 3.0
}
