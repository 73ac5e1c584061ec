//! Versioned experiment configuration (TOML).
//!
//! ```toml
//! schema_version = 1
//!
//! [sim]
//! method = "ucpo"
//! steps = 1000
//! seed = 7
//!
//! [sim.scheme]
//! right = 1.0
//! wrong = 0.0
//! uncertain = 0.8
//!
//! [task_bank]
//! batch_size = 32
//! buckets = [{ solve_prob = 0.1 }]
//! ```
//!
//! Unknown keys anywhere in the document are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::advantage::Method;
use crate::dura::DuraParams;
use crate::error::{Error, Result};
use crate::rollout::RewardScheme;
use crate::sim::{SimConfig, TaskBank};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub group_size: usize,
    pub methods: Vec<Method>,
    pub scheme: RewardScheme,
    #[serde(default)]
    pub dura: DuraParams,
    /// Ratio-grid resolution for continuous sweeps; integer sweep when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_density: Option<usize>,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            group_size: 8,
            methods: vec![Method::GrpoUc, Method::Ucpo],
            scheme: RewardScheme::canonical_ternary(),
            dura: DuraParams::default(),
            grid_density: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_range: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub task_bank: TaskBank,
    #[serde(default)]
    pub sweep: SweepParams,
    #[serde(default)]
    pub output: OutputPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            sim: SimConfig::default(),
            task_bank: TaskBank::default(),
            sweep: SweepParams::default(),
            output: OutputPaths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.sim.validate()?;
        self.task_bank.validate()?;
        self.sweep.scheme.validate()?;
        self.sweep.dura.validate()
    }
}
