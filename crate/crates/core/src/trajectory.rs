use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A uniformly sampled multivariate time series, stored row-major (`len x dim`).
///
/// Time is measured in Lyapunov times: row `i` sits at `t0 + i * dt_lyap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    values: Vec<f64>,
    dim: usize,
    pub dt_lyap: f64,
    pub t0: f64,
    pub system: Option<String>,
}

impl Trajectory {
    pub fn new(values: Vec<f64>, dim: usize, dt_lyap: f64) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(invalid(format!(
                "{} values cannot be shaped into rows of dimension {dim}",
                values.len()
            )));
        }
        if values.len() / dim < 1 {
            return Err(invalid("trajectory must contain at least one row"));
        }
        if !(dt_lyap > 0.0 && dt_lyap.is_finite()) {
            return Err(invalid(format!("dt_lyap must be positive, got {dt_lyap}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite entry at row {}", i / dim)));
        }
        Ok(Self {
            values,
            dim,
            dt_lyap,
            t0: 0.0,
            system: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], dt_lyap: f64) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(invalid("ragged rows"));
        }
        Self::new(rows.concat(), dim, dt_lyap)
    }

    pub fn with_system(mut self, name: impl Into<String>) -> Self {
        self.system = Some(name.into());
        self
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.rows().map(|r| r[c]).collect()
    }

    pub fn last(&self) -> &[f64] {
        self.row(self.len() - 1)
    }

    /// Time stamp of row `i` in Lyapunov times.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt_lyap
    }

    /// Rows `start..end` as a new trajectory with shifted `t0`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(invalid(format!("bad slice {start}..{end} of length {}", self.len())));
        }
        Ok(Self {
            values: self.values[start * self.dim..end * self.dim].to_vec(),
            dim: self.dim,
            dt_lyap: self.dt_lyap,
            t0: self.time(start),
            system: self.system.clone(),
        })
    }

    /// Per-dimension `(min, max)`.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for r in self.rows() {
            for (bd, &v) in b.iter_mut().zip(r) {
                bd.0 = bd.0.min(v);
                bd.1 = bd.1.max(v);
            }
        }
        b
    }

    /// Length of the bounding-box diagonal.
    pub fn extent(&self) -> f64 {
        self.bounds()
            .iter()
            .map(|(lo, hi)| (hi - lo).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}
