//! Experiment config files (TOML, keys mirror [`ExperimentConfig`]).

use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::ExperimentConfig;

/// Parse and validate a config document. Syntax and unknown-field errors carry the line,
/// column and offending key; validation errors name the field.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    cfg.validate()
        .map_err(|e| Error::Config(format!("invalid value: {e}")))?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}
