//! JSON run configurations. Every file carries `schema_version`; unknown keys
//! are rejected so that a misspelt hyperparameter fails loudly.

use std::path::Path;

use hbest_core::sampler::Init;
use hbest_core::{
    Ar2MixSetting, EvalGrid, HierSetting, Hyperparameters, Ma4Setting, Mode, SamplerConfig,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Setting {
    Ma4(Ma4Setting),
    Ar2Mixture(Ar2MixSetting),
    Hierarchical(HierSetting),
}

impl Setting {
    pub fn set_standardize(&mut self, on: bool) {
        match self {
            Setting::Ma4(s) => s.standardize = on,
            Setting::Ar2Mixture(s) => s.standardize = on,
            Setting::Hierarchical(s) => s.standardize = on,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Number of independent datasets S.
    #[serde(default = "one")]
    pub datasets: usize,
    /// Size of the frequency grid the truth tables are written on.
    #[serde(default = "default_grid_size")]
    pub eval_grid_size: usize,
    pub setting: Setting,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainFormat {
    #[default]
    Csv,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub schema_version: u32,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub mode: Mode,
    pub hyperparameters: Hyperparameters,
    pub bare_posterior_ratio: bool,
    pub init_tau: f64,
    pub init: Init,
    /// Centre and scale each series to unit variance before fitting.
    pub standardize: bool,
    pub chain_format: ChainFormat,
    pub eval_grid_size: usize,
    pub trim: (f64, f64),
}

impl Default for FitConfig {
    fn default() -> Self {
        let s = SamplerConfig::default();
        Self {
            schema_version: SCHEMA_VERSION,
            iterations: s.iterations,
            burn_in: s.burn_in,
            seed: s.seed,
            mode: s.mode,
            hyperparameters: s.hp,
            bare_posterior_ratio: s.bare_posterior_ratio,
            init_tau: s.init_tau,
            init: s.init,
            standardize: false,
            chain_format: ChainFormat::Csv,
            eval_grid_size: EvalGrid::DEFAULT_SIZE,
            trim: EvalGrid::DEFAULT_TRIM,
        }
    }
}

impl FitConfig {
    pub fn sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            seed,
            hp: self.hyperparameters.clone(),
            mode: self.mode,
            bare_posterior_ratio: self.bare_posterior_ratio,
            init_tau: self.init_tau,
            init: self.init,
        }
    }

    pub fn eval_grid(&self) -> CliResult<EvalGrid> {
        Ok(EvalGrid::new(self.eval_grid_size, self.trim)?)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.sampler(self.seed).validate()?;
        self.eval_grid()?;
        Ok(())
    }
}

fn one() -> usize {
    1
}

fn default_grid_size() -> usize {
    EvalGrid::DEFAULT_SIZE
}

/// Parse a config file. serde's message carries the line, column and
/// offending field.
pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text).map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => {
            return Err(format!(
                "unsupported schema_version {v} (expected {SCHEMA_VERSION})"
            ))
        }
        None => return Err("missing field `schema_version`".into()),
    }
    // Re-parse from text so errors keep their line and column.
    serde_json::from_str(text).map_err(|e| e.to_string())
}
