//! Benchmark harness for forecasting chaotic dynamical systems.
//!
//! Trajectories come from [`systems`], forecasts from [`forecasters`], scores from
//! [`metrics`]; [`experiments`] wires them into benchmark runs and [`io`] handles
//! files, configs and the external-model protocol.

pub mod error;
pub mod experiments;
pub mod forecasters;
pub mod io;
pub mod metrics;
pub mod systems;
pub mod trajectory;

pub use error::{Error, Result};
pub use trajectory::Trajectory;

/// Written into every artifact the harness produces.
pub const HARNESS_VERSION: &str = env!("CARGO_PKG_VERSION");
