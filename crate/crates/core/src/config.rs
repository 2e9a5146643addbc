//! Experiment configuration: one strict TOML document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::codebook::PretrainConfig;
use crate::datagen::DatasetConfig;
use crate::dynamics::DynamicsConfig;
use crate::error::{Result, SparkError};
use crate::grid::GridSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Root of every random stream.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub threads: usize,
    pub grid: GridSpec,
    pub dataset: DatasetConfig,
    pub pretrain: PretrainConfig,
    pub dynamics: DynamicsConfig,
    pub augment: AugmentConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            threads: 1,
            grid: GridSpec::default(),
            dataset: DatasetConfig::default(),
            pretrain: PretrainConfig::default(),
            dynamics: DynamicsConfig::default(),
            augment: AugmentConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| SparkError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SparkError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            SparkError::Config(msg) => SparkError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(SparkError::Config("threads must be at least 1".into()));
        }
        self.dataset.validate()?;
        self.pretrain.validate()?;
        self.dynamics.validate()?;
        self.augment.validate(Some(self.pretrain.codebook_size))?;
        Ok(())
    }
}

/// Every key with its default value, as a commented TOML document.
pub fn config_reference() -> String {
    let mut out = String::from("# Defaults of every configuration key. Unknown keys are rejected.\n");
    out.push_str(&ExperimentConfig::default().to_toml());
    out.push_str(
        "\n# Optional keys, unset by default:\n\
         # [augment] tau = <float>             unset: mean squared distance of training latents to their nearest code\n\
         # [augment.curriculum] start_epoch = <int>   unset: 20% of dynamics.epochs\n\
         # [augment.curriculum] ramp_epochs = <int>   unset: 30% of dynamics.epochs\n\
         # [dataset.ood_rule] kind = \"explicit\" (out = [[...]]) | \"below\"/\"above\" (component, threshold) | \"all_in_domain\"\n",
    );
    out
}
