//! Trajectory CSV files (`t_lyap,x0,x1,...`) with a JSON metadata sidecar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trajectory::Trajectory;
use crate::HARNESS_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub harness_version: String,
    pub seed: u64,
    pub system: Option<String>,
    pub ic_index: Option<usize>,
    pub dt_lyap: f64,
    pub t0: f64,
    pub dim: usize,
    pub len: usize,
    pub registry_checksum: Option<String>,
}

impl TrajectoryMeta {
    pub fn for_trajectory(traj: &Trajectory, seed: u64) -> Self {
        Self {
            harness_version: HARNESS_VERSION.into(),
            seed,
            system: traj.system.clone(),
            ic_index: None,
            dt_lyap: traj.dt_lyap,
            t0: traj.t0,
            dim: traj.dim(),
            len: traj.len(),
            registry_checksum: None,
        }
    }
}

/// `run.csv` -> `run.meta.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

/// Write `traj` as CSV plus its metadata sidecar. Values are written in shortest
/// round-trip form, so reading back is bit-exact.
pub fn write_trajectory(path: &Path, traj: &Trajectory, meta: &TrajectoryMeta) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["t_lyap".to_string()];
    header.extend((0..traj.dim()).map(|c| format!("x{c}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, row) in traj.rows().enumerate() {
        let mut rec = vec![traj.time(i).to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

/// Read a trajectory CSV. The sidecar supplies `dt_lyap` and `t0` when present; otherwise
/// they are inferred from the time column.
pub fn read_trajectory(path: &Path) -> Result<(Trajectory, Option<TrajectoryMeta>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("t_lyap") || header.len() < 2 {
        return Err(invalid(format!(
            "{}: header must start with `t_lyap` and name at least one channel",
            path.display()
        )));
    }
    let dim = header.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| invalid(format!("{}: row {}: `{s}`: {e}", path.display(), i + 2)))
        };
        times.push(parse(&rec[0])?);
        for s in rec.iter().skip(1) {
            values.push(parse(s)?);
        }
    }
    let meta_path = sidecar_path(path);
    let meta: Option<TrajectoryMeta> = if meta_path.exists() {
        Some(serde_json::from_str(&std::fs::read_to_string(meta_path)?)?)
    } else {
        None
    };
    let (dt, t0) = match &meta {
        Some(m) => (m.dt_lyap, m.t0),
        None if times.len() >= 2 => ((times[times.len() - 1] - times[0]) / (times.len() - 1) as f64, times[0]),
        None => (1.0, times.first().copied().unwrap_or(0.0)),
    };
    let mut t = Trajectory::new(values, dim, dt)?.with_t0(t0);
    if let Some(m) = &meta {
        t.system = m.system.clone();
    }
    Ok((t, meta))
}
