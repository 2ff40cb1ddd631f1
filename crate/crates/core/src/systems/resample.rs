use crate::error::{invalid, Error, Result};
use crate::trajectory::Trajectory;

/// Benchmark granularity: samples per Lyapunov time.
pub const POINTS_PER_LYAPUNOV: usize = 30;

/// Positions within this distance of a source sample copy it verbatim.
const ALIGN_EPS: f64 = 1e-9;

/// Resample onto a uniform grid of `points_per_lyapunov` samples per Lyapunov time.
///
/// Grid points that coincide with source samples are copied bit-exactly; the rest
/// use four-point cubic Lagrange interpolation (window clamped at the ends). The
/// grid covers `[t0, t0 + span]` inclusively, so a source spanning `L` Lyapunov
/// times yields `floor(L * points_per_lyapunov) + 1` samples.
pub fn resample(traj: &Trajectory, points_per_lyapunov: usize) -> Result<Trajectory> {
    if points_per_lyapunov == 0 {
        return Err(invalid("points_per_lyapunov must be >= 1"));
    }
    let target = 1.0 / points_per_lyapunov as f64;
    let source = traj.dt_lyap;
    if target < source * (1.0 - 1e-12) {
        return Err(Error::UpsamplingRefused {
            source_dt: source,
            target_dt: target,
        });
    }
    let ratio = target / source;
    let len = traj.len();
    let dim = traj.dim();
    let n_out = ((len - 1) as f64 / ratio + ALIGN_EPS).floor() as usize + 1;

    let mut out = Vec::with_capacity(n_out * dim);
    for k in 0..n_out {
        let pos = k as f64 * ratio;
        let nearest = pos.round();
        if (pos - nearest).abs() <= ALIGN_EPS * pos.max(1.0) && (nearest as usize) < len {
            out.extend_from_slice(traj.row(nearest as usize));
            continue;
        }
        if len < 4 {
            // Too short for a cubic stencil; fall back to linear.
            let i = (pos.floor() as usize).min(len - 2);
            let f = pos - i as f64;
            for d in 0..dim {
                out.push(traj.row(i)[d] * (1.0 - f) + traj.row(i + 1)[d] * f);
            }
            continue;
        }
        let base = (pos.floor() as isize - 1).clamp(0, len as isize - 4) as usize;
        let u = pos - base as f64; // in [0, 3]
        let w = lagrange4(u);
        for d in 0..dim {
            let v = (0..4).map(|j| w[j] * traj.row(base + j)[d]).sum();
            out.push(v);
        }
    }
    let mut res = Trajectory::new(out, dim, target)?.with_t0(traj.t0);
    res.system = traj.system.clone();
    Ok(res)
}

/// Lagrange basis weights for nodes 0, 1, 2, 3 evaluated at `u`.
fn lagrange4(u: f64) -> [f64; 4] {
    [
        -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0,
        u * (u - 2.0) * (u - 3.0) / 2.0,
        -u * (u - 1.0) * (u - 3.0) / 2.0,
        u * (u - 1.0) * (u - 2.0) / 6.0,
    ]
}
