//! Experiment configuration: a TOML document with a versioned schema.
//!
//! Every key is optional except `schema_version`; unknown keys are
//! rejected. Command-line flags override file values.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Initial data for flows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitialData {
    /// `√(1−2ε²)Rx` with a random rotation `R`.
    Rotation,
    /// `√(1−2ε²)u_λ` with `λ = dilation_lambda`.
    Dilation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// What `snapshot` writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotFamily {
    /// `√(1−2ε²)x`.
    Rotation,
    /// The stereographic dilation `u_λ`.
    Dilation,
    /// The output of a perturbed-rotation solve.
    Solve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub band_limit: usize,
    pub epsilon: Vec<f64>,
    pub gamma: f64,
    /// H¹ norm of the initial perturbation.
    pub perturb_amp: f64,
    /// Highest degree carried by the perturbation.
    pub perturb_lmax: usize,
    /// First seed; rows use `seed, seed+1, …`.
    pub seed: u64,
    /// Number of seeds per ε.
    pub seeds: u64,
    /// Flow time step; `ε²/2` when absent.
    pub dt: Option<f64>,
    pub tol: f64,
    pub max_steps: usize,
    /// Dilation factors for the barycenter rows of `verify-identities`.
    pub lambdas: Vec<f64>,
    pub initial: InitialData,
    pub dilation_lambda: f64,
    pub family: SnapshotFamily,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            band_limit: 64,
            epsilon: vec![0.2, 0.1, 0.05],
            gamma: 1.0,
            perturb_amp: 0.1,
            perturb_lmax: 4,
            seed: 0,
            seeds: 10,
            dt: None,
            tol: 1e-10,
            max_steps: 20_000,
            lambdas: vec![0.5, 0.8, 1.0, 1.25, 2.0],
            initial: InitialData::Rotation,
            dilation_lambda: 6.0,
            family: SnapshotFamily::Rotation,
            out: None,
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: Option<toml::Value>,
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let probe: VersionProbe = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        match probe.schema_version {
            None => return Err(CliError::Config("missing schema_version".into())),
            Some(toml::Value::Integer(v)) if v == i64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(CliError::Config(format!("unsupported schema_version {v} (expected {SCHEMA_VERSION})")))
            }
        }
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Serialize(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {}", self.schema_version));
        }
        if !(glsphere::spherical::MIN_BAND_LIMIT..=glsphere::spherical::MAX_BAND_LIMIT).contains(&self.band_limit) {
            return bad(format!("band_limit {} outside supported range", self.band_limit));
        }
        if self.epsilon.is_empty() {
            return bad("epsilon list is empty".into());
        }
        for &e in &self.epsilon {
            if !(e > 0.0 && e < std::f64::consts::FRAC_1_SQRT_2) {
                return bad(format!("epsilon {e} outside (0, 1/√2)"));
            }
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma {} must be positive", self.gamma));
        }
        if !(self.perturb_amp >= 0.0 && self.perturb_amp.is_finite()) {
            return bad(format!("perturb_amp {} must be non-negative", self.perturb_amp));
        }
        if self.perturb_lmax > self.band_limit {
            return bad(format!("perturb_lmax {} exceeds band_limit {}", self.perturb_lmax, self.band_limit));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt {dt} must be positive"));
            }
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol {} must be positive", self.tol));
        }
        for &l in &self.lambdas {
            if !(l > 0.0 && l <= glsphere::analytic::MAX_LAMBDA) {
                return bad(format!("lambda {l} outside (0, {}]", glsphere::analytic::MAX_LAMBDA));
            }
        }
        if !(self.dilation_lambda > 0.0 && self.dilation_lambda <= glsphere::analytic::MAX_LAMBDA) {
            return bad(format!("dilation_lambda {} out of range", self.dilation_lambda));
        }
        Ok(())
    }

    /// Extra precondition of the rigidity sweep.
    pub fn validate_sweep(&self) -> Result<()> {
        self.validate()?;
        if let Some(e) = self.epsilon.iter().find(|&&e| e > 0.3) {
            return Err(CliError::Config(format!("sweep epsilon {e} exceeds 0.3")));
        }
        Ok(())
    }

    pub fn dt_for(&self, eps: f64) -> f64 {
        self.dt.unwrap_or(0.5 * eps * eps)
    }
}
