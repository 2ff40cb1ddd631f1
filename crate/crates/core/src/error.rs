use thiserror::Error;

/// Errors produced anywhere in the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("integration blew up at t = {last_valid_time} (last finite state)")]
    IntegrationBlowup { last_valid_time: f64 },

    #[error("step size underflow at t = {0}")]
    StepSizeUnderflow(f64),

    #[error("lyapunov estimate did not converge: {0}")]
    EstimationFailure(String),

    #[error("refusing to upsample: source dt {source_dt} is coarser than target dt {target_dt}")]
    UpsamplingRefused { source_dt: f64, target_dt: f64 },

    #[error("fit failed: {0}")]
    FitFailure(String),

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("undefined similarity: {0}")]
    UndefinedSimilarity(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("shuffle impossible: {0}")]
    ShuffleImpossible(String),

    #[error("degenerate pendulum frame {frame}: {reason}")]
    DegenerateFrame { frame: usize, reason: String },

    #[error("record schema version {found} needs migration (this build reads version {expected})")]
    MigrationNeeded { found: u32, expected: u32 },

    #[error("config error: {0}")]
    Config(String),

    #[error("adapter error: {0}")]
    Adapter(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
