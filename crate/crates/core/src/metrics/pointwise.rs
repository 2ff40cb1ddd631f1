use crate::error::{invalid, Result};

/// Symmetric absolute percentage error between two state vectors, in `[0, 200]`.
///
/// Components where both truth and prediction are exactly zero contribute no error.
pub fn smape_pointwise(truth: &[f64], pred: &[f64]) -> f64 {
    debug_assert_eq!(truth.len(), pred.len());
    let d = truth.len();
    if d == 0 {
        return 0.0;
    }
    let sum: f64 = truth
        .iter()
        .zip(pred)
        .map(|(&x, &y)| {
            let den = x.abs() + y.abs();
            if den == 0.0 {
                0.0
            } else {
                (x - y).abs() / den
            }
        })
        .sum();
    200.0 * sum / d as f64
}

fn check_shapes(truth: &[f64], pred: &[f64], dim: usize) -> Result<usize> {
    if dim == 0 || truth.len() != pred.len() || truth.len() % dim != 0 {
        return Err(invalid(format!(
            "shape mismatch: truth {} values, prediction {} values, dim {dim}",
            truth.len(),
            pred.len()
        )));
    }
    Ok(truth.len() / dim)
}

/// Per-horizon sMAPE for row-major `H x dim` arrays.
pub fn smape_curve(truth: &[f64], pred: &[f64], dim: usize) -> Result<Vec<f64>> {
    check_shapes(truth, pred, dim)?;
    Ok(truth
        .chunks_exact(dim)
        .zip(pred.chunks_exact(dim))
        .map(|(x, y)| smape_pointwise(x, y))
        .collect())
}

/// sMAPE averaged over all horizons.
pub fn smape_cumulative(truth: &[f64], pred: &[f64], dim: usize) -> Result<f64> {
    let curve = smape_curve(truth, pred, dim)?;
    if curve.is_empty() {
        return Err(invalid("empty forecast"));
    }
    Ok(curve.iter().sum::<f64>() / curve.len() as f64)
}

/// Number of leading steps whose sMAPE stays strictly below `epsilon`.
pub fn valid_steps(curve: &[f64], epsilon: f64) -> usize {
    curve.iter().take_while(|&&s| s < epsilon).count()
}

/// Valid prediction time in Lyapunov times: the length of the leading run of
/// horizons with per-step sMAPE below `epsilon`, times `dt_lyap`.
pub fn vpt(truth: &[f64], pred: &[f64], dim: usize, epsilon: f64, dt_lyap: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(invalid("vpt threshold must be > 0"));
    }
    let curve = smape_curve(truth, pred, dim)?;
    Ok(valid_steps(&curve, epsilon) as f64 * dt_lyap)
}
