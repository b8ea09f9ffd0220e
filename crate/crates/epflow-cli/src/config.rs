//! Experiment configuration: JSON files plus flag overrides resolve into one
//! fully-specified, serializable config that the manifest echoes verbatim.

use std::path::{Path, PathBuf};

use epflow_core::Invariance;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk config file. Unknown keys are rejected everywhere.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let file: ConfigFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        if let Some(v) = file.schema_version {
            if v != SCHEMA_VERSION {
                return Err(CliError::Config(format!(
                    "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
                )));
            }
        }
        Ok(file)
    }

    /// Parse the per-experiment parameter block, defaulting missing keys and
    /// rejecting unknown ones.
    pub fn params_as<T: Default + serde::de::DeserializeOwned>(&self) -> Result<T, CliError> {
        if self.params.is_null() {
            return Ok(T::default());
        }
        serde_json::from_value(self.params.clone())
            .map_err(|e| CliError::Config(format!("invalid params: {e}")))
    }

    pub fn check_experiment(&self, expected: &str) -> Result<(), CliError> {
        if let Some(name) = &self.experiment {
            if name != expected {
                return Err(CliError::Config(format!(
                    "config file is for experiment '{name}', not '{expected}'"
                )));
            }
        }
        Ok(())
    }
}

fn positive(value: f64, name: &str) -> Result<(), CliError> {
    if !value.is_finite() || value <= 0.0 {
        return Err(CliError::Config(format!(
            "{name} must be positive, got {value}"
        )));
    }
    Ok(())
}

fn positive_triple(value: [f64; 3], name: &str) -> Result<(), CliError> {
    for (i, x) in value.iter().enumerate() {
        positive(*x, &format!("{name}[{i}]"))?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RigidBodyParams {
    pub inertia: [f64; 3],
    /// Connection inertia; defaults to the metric inertia when absent.
    pub inertia_connection: Option<[f64; 3]>,
    pub u0: [f64; 3],
    pub dt: f64,
    pub t_end: f64,
    /// Scale applied to the orthonormal noise directions; zero disables noise.
    pub noise_scale: f64,
    pub side: Invariance,
}

impl Default for RigidBodyParams {
    fn default() -> Self {
        Self {
            inertia: [1.0, 2.0, 3.0],
            inertia_connection: None,
            u0: [1.0, 1.0, 1.0],
            dt: 1e-3,
            t_end: 1.0,
            noise_scale: 1.0,
            side: Invariance::Left,
        }
    }
}

impl RigidBodyParams {
    pub fn validate(&self) -> Result<(), CliError> {
        positive_triple(self.inertia, "inertia")?;
        if let Some(ic) = self.inertia_connection {
            positive_triple(ic, "inertia_connection")?;
        }
        positive(self.dt, "dt")?;
        positive(self.t_end, "t_end")?;
        if self.noise_scale < 0.0 || !self.noise_scale.is_finite() {
            return Err(CliError::Config("noise_scale must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariationalParams {
    pub inertia: [f64; 3],
    pub inertia_connection: Option<[f64; 3]>,
    pub u0: [f64; 3],
    pub dt: f64,
    pub eps: f64,
    pub noise_scale: f64,
    pub side: Invariance,
}

impl Default for VariationalParams {
    fn default() -> Self {
        Self {
            inertia: [1.0, 2.0, 3.0],
            inertia_connection: None,
            u0: [1.0, 1.0, 1.0],
            dt: 1e-3,
            eps: 1e-4,
            noise_scale: 1.0,
            side: Invariance::Left,
        }
    }
}

impl VariationalParams {
    pub fn validate(&self) -> Result<(), CliError> {
        positive_triple(self.inertia, "inertia")?;
        if let Some(ic) = self.inertia_connection {
            positive_triple(ic, "inertia_connection")?;
        }
        positive(self.dt, "dt")?;
        positive(self.eps, "eps")?;
        if self.eps > 0.1 {
            return Err(CliError::Config("eps must be at most 0.1".into()));
        }
        if self.noise_scale < 0.0 {
            return Err(CliError::Config("noise_scale must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorCheckParams {
    pub inertia: [f64; 3],
    /// Noise directions as coordinate triples; the default single direction
    /// has a nonzero self-connection so the compensator is load-bearing.
    pub noise: Vec<[f64; 3]>,
    pub u_const: [f64; 3],
    pub h: f64,
    pub t_end: f64,
    pub n_samples: usize,
    pub min_samples: usize,
    /// How many sample paths to dump to CSV.
    pub n_dump: usize,
    pub side: Invariance,
}

impl Default for GeneratorCheckParams {
    fn default() -> Self {
        Self {
            inertia: [1.0, 2.0, 3.0],
            noise: vec![[1.0, 1.0, 0.0]],
            u_const: [0.2, 0.1, 0.3],
            h: 1e-3,
            t_end: 0.1,
            n_samples: 20_000,
            min_samples: 100,
            n_dump: 3,
            side: Invariance::Left,
        }
    }
}

impl GeneratorCheckParams {
    pub fn validate(&self) -> Result<(), CliError> {
        positive_triple(self.inertia, "inertia")?;
        positive(self.h, "h")?;
        positive(self.t_end, "t_end")?;
        if self.n_samples == 0 {
            return Err(CliError::Config("n_samples must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditParams {
    /// Sample counts for the randomized invariants.
    pub n_random: usize,
    /// Paths in the reduced-size generator consistency entry.
    pub n_paths: usize,
}

impl Default for AuditParams {
    fn default() -> Self {
        Self {
            n_random: 100,
            n_paths: 4000,
        }
    }
}

impl AuditParams {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_random == 0 || self.n_paths == 0 {
            return Err(CliError::Config(
                "audit sample counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TorusIdentityParams {
    pub m_list: Vec<u32>,
    pub gamma: f64,
}

impl Default for TorusIdentityParams {
    fn default() -> Self {
        Self {
            m_list: vec![1, 2, 4, 6],
            gamma: 3.0,
        }
    }
}

impl TorusIdentityParams {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.m_list.is_empty() || self.m_list.contains(&0) {
            return Err(CliError::Config(
                "m_list must contain positive truncations".into(),
            ));
        }
        positive(self.gamma, "gamma")?;
        Ok(())
    }
}

/// One initial-condition mode: representative wavevector plus its cosine and
/// sine coefficients.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeAmplitude {
    pub k: [i32; 2],
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TorusRunParams {
    pub m: u32,
    pub gamma: f64,
    /// Explicit amplitude table indexed by |k|; overrides the power law.
    pub lambda: Option<Vec<f64>>,
    /// All amplitudes zero (no noise, zero effective viscosity).
    pub inviscid: bool,
    pub u0: Vec<ModeAmplitude>,
    pub dt: f64,
    pub t_end: f64,
}

impl Default for TorusRunParams {
    fn default() -> Self {
        Self {
            m: 4,
            gamma: 3.0,
            lambda: None,
            inviscid: false,
            u0: vec![ModeAmplitude {
                k: [1, 0],
                a: 1.0,
                b: 0.0,
            }],
            dt: 1e-3,
            t_end: 1.0,
        }
    }
}

impl TorusRunParams {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.m == 0 {
            return Err(CliError::Config("m must be positive".into()));
        }
        positive(self.gamma, "gamma")?;
        positive(self.dt, "dt")?;
        positive(self.t_end, "t_end")?;
        if let Some(lam) = &self.lambda {
            if lam.len() != self.m as usize {
                return Err(CliError::Config(format!(
                    "lambda must have m = {} entries",
                    self.m
                )));
            }
            if lam.iter().any(|x| *x < 0.0 || !x.is_finite()) {
                return Err(CliError::Config(
                    "lambda entries must be non-negative".into(),
                ));
            }
        }
        if self.u0.is_empty() {
            return Err(CliError::Config("u0 must contain at least one mode".into()));
        }
        Ok(())
    }
}
