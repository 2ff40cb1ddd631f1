//! Double-pendulum ingestion from tracked centroid coordinates.
//!
//! Angle convention: measured from the screen-down direction, counterclockwise positive
//! as seen on screen (pixel `y` grows downward), in radians.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trajectory::Trajectory;

pub const FRAME_RATE: f64 = 400.0;
pub const DECIMATION: usize = 3;

/// Centroids of the pivot, hinge and tip in one video frame (pixels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumFrame {
    pub frame: f64,
    pub pivot: [f64; 2],
    pub hinge: [f64; 2],
    pub tip: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumConfig {
    pub frame_rate: f64,
    pub decimation: usize,
    /// Lyapunov time in seconds used to express the output time step; seconds when absent.
    pub lyapunov_time: Option<f64>,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        Self {
            frame_rate: FRAME_RATE,
            decimation: DECIMATION,
            lyapunov_time: None,
        }
    }
}

/// Angle of `to - from` from screen-down.
fn arm_angle(from: [f64; 2], to: [f64; 2]) -> f64 {
    (to[0] - from[0]).atan2(to[1] - from[1])
}

/// Remove 2π jumps so consecutive samples differ by less than π.
pub fn unwrap_angles(raw: &[f64]) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    let mut out = Vec::with_capacity(raw.len());
    let mut offset = 0.0;
    for (i, &a) in raw.iter().enumerate() {
        if i > 0 {
            let d = a - raw[i - 1];
            if d > std::f64::consts::PI {
                offset -= tau;
            } else if d < -std::f64::consts::PI {
                offset += tau;
            }
        }
        out.push(a + offset);
    }
    out
}

/// Convert tracked frames into `(θ1, θ2, θ̇1, θ̇2)` rows. Rates use central differences
/// (rad/s); frames are then decimated starting from the first interior frame, giving
/// `⌊frames / decimation⌋` rows.
pub fn ingest_pendulum(frames: &[PendulumFrame], cfg: &PendulumConfig) -> Result<Trajectory> {
    let n = frames.len();
    if cfg.decimation == 0 || !(cfg.frame_rate > 0.0) {
        return Err(invalid("frame rate and decimation must be positive"));
    }
    if n / cfg.decimation == 0 || n < 3 {
        return Err(invalid(format!("{n} frames yield no output rows")));
    }
    if let Some(i) = frames.windows(2).position(|w| !(w[1].frame > w[0].frame)) {
        return Err(invalid(format!("frame times not increasing at frame {}", i + 1)));
    }
    let mut th1 = Vec::with_capacity(n);
    let mut th2 = Vec::with_capacity(n);
    for (i, f) in frames.iter().enumerate() {
        if f.pivot.iter().chain(&f.hinge).chain(&f.tip).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateFrame {
                frame: i,
                reason: "non-finite coordinate".into(),
            });
        }
        if f.pivot == f.hinge {
            return Err(Error::DegenerateFrame {
                frame: i,
                reason: "pivot and hinge coincide".into(),
            });
        }
        if f.hinge == f.tip {
            return Err(Error::DegenerateFrame {
                frame: i,
                reason: "hinge and tip coincide".into(),
            });
        }
        th1.push(arm_angle(f.pivot, f.hinge));
        th2.push(arm_angle(f.hinge, f.tip));
    }
    let (th1, th2) = (unwrap_angles(&th1), unwrap_angles(&th2));
    let rate = |th: &[f64], i: usize| {
        let dt = (frames[i + 1].frame - frames[i - 1].frame) / cfg.frame_rate;
        (th[i + 1] - th[i - 1]) / dt
    };
    let rows = n / cfg.decimation;
    let mut values = Vec::with_capacity(rows * 4);
    for j in 0..rows {
        let i = 1 + j * cfg.decimation;
        values.extend_from_slice(&[th1[i], th2[i], rate(&th1, i), rate(&th2, i)]);
    }
    let step = cfg.decimation as f64 / cfg.frame_rate;
    let dt = cfg.lyapunov_time.map_or(step, |l| step / l);
    Trajectory::new(values, 4, dt).map(|t| t.with_system("double_pendulum"))
}

/// Read frames from CSV with header `frame,pivot_x,pivot_y,hinge_x,hinge_y,tip_x,tip_y`.
pub fn read_pendulum_csv(path: &Path) -> Result<Vec<PendulumFrame>> {
    const COLUMNS: [&str; 7] = ["frame", "pivot_x", "pivot_y", "hinge_x", "hinge_y", "tip_x", "tip_y"];
    let mut r = csv::Reader::from_path(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    let header = r
        .headers()
        .map_err(|e| invalid(format!("{}: {e}", path.display())))?
        .clone();
    let idx: Vec<usize> = COLUMNS
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h.trim() == *c)
                .ok_or_else(|| invalid(format!("{}: missing column `{c}`", path.display())))
        })
        .collect::<Result<_>>()?;
    r.records()
        .enumerate()
        .map(|(row, rec)| {
            let rec = rec.map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            let v: Vec<f64> = idx
                .iter()
                .map(|&i| {
                    let s = rec.get(i).unwrap_or("").trim();
                    s.parse::<f64>()
                        .map_err(|e| invalid(format!("{}: row {}: `{s}`: {e}", path.display(), row + 2)))
                })
                .collect::<Result<_>>()?;
            Ok(PendulumFrame {
                frame: v[0],
                pivot: [v[1], v[2]],
                hinge: [v[3], v[4]],
                tip: [v[5], v[6]],
            })
        })
        .collect()
}
