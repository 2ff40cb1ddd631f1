//! Windowed Pearson similarity and the context-overlap statistic.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A query window, centered once and reused against many candidates.
pub struct CenteredQuery {
    centered: Vec<f64>,
    norm: f64,
}

impl CenteredQuery {
    /// `None` when the window has zero variance.
    pub fn new(window: &[f64]) -> Option<Self> {
        let m = window.len() as f64;
        let mean = window.iter().sum::<f64>() / m;
        let centered: Vec<f64> = window.iter().map(|v| v - mean).collect();
        let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
        (norm > 0.0 && norm.is_finite()).then_some(Self { centered, norm })
    }

    pub fn len(&self) -> usize {
        self.centered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centered.is_empty()
    }

    /// Pearson correlation with `candidate`; `None` when the candidate is constant.
    pub fn pearson(&self, candidate: &[f64]) -> Option<f64> {
        debug_assert_eq!(candidate.len(), self.centered.len());
        let m = candidate.len() as f64;
        let mean = candidate.iter().sum::<f64>() / m;
        let (mut dot, mut ss) = (0.0, 0.0);
        for (&c, &q) in candidate.iter().zip(&self.centered) {
            let d = c - mean;
            dot += d * q;
            ss += d * d;
        }
        if ss <= 0.0 {
            return None;
        }
        Some((dot / (ss.sqrt() * self.norm)).clamp(-1.0, 1.0))
    }
}

/// Best-matching earlier window (first maximum on ties).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapMatch {
    pub value: f64,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    /// Windows of exactly `min_len` points.
    #[default]
    Fixed,
    /// Maximize over every window length from `min_len` to half the context.
    MaxOverLengths,
}

fn best_for_len(context: &[f64], len: usize) -> Result<Option<OverlapMatch>> {
    let c = context.len();
    let query = CenteredQuery::new(&context[c - len..])
        .ok_or_else(|| Error::UndefinedSimilarity("final context window has zero variance".into()))?;
    let mut best: Option<OverlapMatch> = None;
    // Candidates may not overlap the final window.
    for j in 0..=c - 2 * len {
        if let Some(r) = query.pearson(&context[j..j + len]) {
            if best.map_or(true, |b| r > b.value) {
                best = Some(OverlapMatch {
                    value: r,
                    offset: j,
                    len,
                });
            }
        }
    }
    Ok(best)
}

/// Maximum Pearson correlation between the final `min_len` points of `context` and any
/// earlier, non-overlapping window of the same length.
pub fn context_overlap(context: &[f64], min_len: usize, mode: OverlapMode) -> Result<OverlapMatch> {
    if min_len < 2 {
        return Err(invalid("overlap window must have at least two points"));
    }
    if context.len() < 2 * min_len {
        return Err(invalid(format!(
            "context of {} points is shorter than twice the overlap window {min_len}",
            context.len()
        )));
    }
    let lens: Vec<usize> = match mode {
        OverlapMode::Fixed => vec![min_len],
        OverlapMode::MaxOverLengths => (min_len..=context.len() / 2).collect(),
    };
    let mut best: Option<OverlapMatch> = None;
    for len in lens {
        if let Some(m) = best_for_len(context, len)? {
            if best.map_or(true, |b| m.value > b.value) {
                best = Some(m);
            }
        }
    }
    best.ok_or_else(|| Error::UndefinedSimilarity("every candidate window is constant".into()))
}
