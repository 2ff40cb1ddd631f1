use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::field::{PolyTerm, VectorField};
use crate::error::{invalid, Error, Result};

/// Default transient discarded before a state counts as on-attractor, in Lyapunov times.
pub const DEFAULT_BURN_IN_LYAP: f64 = 20.0;

/// The on-disk form of one registry entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDef {
    pub name: String,
    pub kind: String,
    pub dim: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<PolyTerm>>,
    pub lyapunov_exponent: f64,
    pub reference_fractal_dim: f64,
    pub integration_dt: f64,
    /// Burn-in in time units; defaults to 20 Lyapunov times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in_time: Option<f64>,
    pub initial_state: Vec<f64>,
    #[serde(default)]
    pub provenance: String,
}

/// A named chaotic ODE together with its benchmark annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub name: String,
    pub dim: usize,
    pub params: BTreeMap<String, f64>,
    pub field: VectorField,
    /// Largest Lyapunov exponent, 1/time.
    pub lyapunov_exponent: f64,
    pub reference_fractal_dim: f64,
    /// Raw integrator output interval, time units.
    pub integration_dt: f64,
    pub burn_in_time: f64,
    /// Canonical seed point that initial conditions are perturbed around.
    pub initial_state: Vec<f64>,
    pub provenance: String,
    def: SystemDef,
}

impl SystemSpec {
    pub fn from_def(def: SystemDef) -> Result<Self> {
        if def.dim == 0 {
            return Err(invalid(format!("{}: dim must be >= 1", def.name)));
        }
        if !(def.lyapunov_exponent > 0.0 && def.lyapunov_exponent.is_finite()) {
            return Err(invalid(format!("{}: lyapunov_exponent must be > 0", def.name)));
        }
        if !(def.integration_dt > 0.0) {
            return Err(invalid(format!("{}: integration_dt must be > 0", def.name)));
        }
        if !(def.reference_fractal_dim > 0.0 && def.reference_fractal_dim <= def.dim as f64) {
            return Err(invalid(format!(
                "{}: reference_fractal_dim must lie in (0, dim]",
                def.name
            )));
        }
        if def.initial_state.len() != def.dim {
            return Err(invalid(format!("{}: initial_state has wrong length", def.name)));
        }
        let field = VectorField::resolve(&def.kind, &def.params, def.terms.as_deref(), def.dim)?;
        let burn_in_time = match def.burn_in_time {
            Some(b) if b >= 0.0 => b,
            Some(_) => return Err(invalid(format!("{}: burn_in_time must be >= 0", def.name))),
            None => DEFAULT_BURN_IN_LYAP / def.lyapunov_exponent,
        };
        Ok(Self {
            name: def.name.clone(),
            dim: def.dim,
            params: def.params.clone(),
            field,
            lyapunov_exponent: def.lyapunov_exponent,
            reference_fractal_dim: def.reference_fractal_dim,
            integration_dt: def.integration_dt,
            burn_in_time,
            initial_state: def.initial_state.clone(),
            provenance: def.provenance.clone(),
            def,
        })
    }

    /// Lyapunov time `1/lambda`, in time units.
    pub fn lyapunov_time(&self) -> f64 {
        1.0 / self.lyapunov_exponent
    }

    pub fn def(&self) -> &SystemDef {
        &self.def
    }

    /// Copy of this system with one parameter replaced.
    pub fn with_param(&self, key: &str, value: f64) -> Result<Self> {
        let mut def = self.def.clone();
        if !def.params.contains_key(key) {
            return Err(invalid(format!("{} has no parameter `{key}`", self.name)));
        }
        def.params.insert(key.to_string(), value);
        Self::from_def(def)
    }

    /// Copy of this system carrying new annotations. An explicit burn-in is kept; the
    /// default one follows the new Lyapunov time.
    pub fn with_annotations(&self, lyapunov_exponent: f64, reference_fractal_dim: f64) -> Result<Self> {
        let mut def = self.def.clone();
        def.lyapunov_exponent = lyapunov_exponent;
        def.reference_fractal_dim = reference_fractal_dim.min(def.dim as f64);
        Self::from_def(def)
    }

    /// Unit-frequency harmonic oscillator used as a non-chaotic reference flow.
    /// Its `lyapunov_exponent` annotation is a nominal timescale, not a measured exponent.
    pub fn harmonic_oscillator() -> Self {
        Self::from_def(SystemDef {
            name: "HarmonicOscillator".into(),
            kind: "harmonic".into(),
            dim: 2,
            params: BTreeMap::from([("omega".to_string(), 1.0)]),
            terms: None,
            lyapunov_exponent: 1.0,
            reference_fractal_dim: 1.0,
            integration_dt: 0.01,
            burn_in_time: Some(0.0),
            initial_state: vec![1.0, 0.0],
            provenance: "test flow; circular orbits x^2 + y^2 = const".into(),
        })
        .expect("harmonic oscillator definition is valid")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RegistryFile {
    system: Vec<SystemDef>,
}

/// An ordered set of systems, loaded from TOML (`[[system]]` tables).
#[derive(Debug, Clone)]
pub struct Registry {
    systems: Vec<SystemSpec>,
    checksum: String,
}

const BUILTIN_REGISTRY: &str = include_str!("../../data/systems.toml");

impl Registry {
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN_REGISTRY).expect("built-in registry parses")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: RegistryFile = toml::from_str(text).map_err(|e| Error::Config(format!("registry: {e}")))?;
        let mut systems = Vec::with_capacity(file.system.len());
        for def in file.system {
            if systems.iter().any(|s: &SystemSpec| s.name == def.name) {
                return Err(invalid(format!("duplicate system name `{}`", def.name)));
            }
            systems.push(SystemSpec::from_def(def)?);
        }
        let checksum = hex::encode(Sha256::digest(text.as_bytes()));
        Ok(Self { systems, checksum })
    }

    /// Registry holding `systems`, checksummed over their serialized form.
    pub fn from_systems(systems: Vec<SystemSpec>) -> Result<Self> {
        let file = RegistryFile {
            system: systems.iter().map(|s| s.def.clone()).collect(),
        };
        Self::from_toml(&toml::to_string_pretty(&file).expect("registry serializes"))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        let file = RegistryFile {
            system: self.systems.iter().map(|s| s.def.clone()).collect(),
        };
        toml::to_string_pretty(&file).expect("registry serializes")
    }

    pub fn get(&self, name: &str) -> Result<&SystemSpec> {
        self.systems
            .iter()
            .find(|s| s.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownSystem(name.to_string()))
    }

    pub fn systems(&self) -> &[SystemSpec] {
        &self.systems
    }

    pub fn names(&self) -> Vec<&str> {
        self.systems.iter().map(|s| s.name.as_str()).collect()
    }

    /// SHA-256 of the registry source text.
    pub fn checksum(&self) -> &str {
        &self.checksum
    }
}
