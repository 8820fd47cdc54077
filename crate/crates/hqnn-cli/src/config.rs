//! Experiment configuration: a JSON document with flag overrides (flags win).
//! Unknown keys are rejected so stale configs fail loudly instead of running
//! a half-default experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hqnn_core::ansatz::CircuitSpec;
use hqnn_core::error::Error;
use hqnn_core::model::{ModelConfig, TrainConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Csv { path: PathBuf },
    Synth { n: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            ratios: [0.6, 0.2, 0.2],
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpressibilityConfig {
    pub pairs: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for ExpressibilityConfig {
    fn default() -> Self {
        ExpressibilityConfig {
            pairs: 5000,
            bins: 75,
            seed: 1234,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default = "default_model")]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub expressibility: ExpressibilityConfig,
    /// Number of independent split repetitions averaged per sweep row.
    #[serde(default = "default_num_splits")]
    pub num_splits: usize,
}

fn default_model() -> ModelConfig {
    ModelConfig::strict(CircuitSpec::single(13, 2).expect("static spec"))
}

fn default_num_splits() -> usize {
    5
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!(
                "invalid config {}: {e}",
                path.display()
            )))?;
        config.normalize();
        config.validate()?;
        Ok(config)
    }

    /// Fill per-backbone encoder defaults when the config leaves them out.
    pub fn normalize(&mut self) {
        if self.model.encoder_dims.is_empty() {
            let template = self
                .model
                .circuit
                .clone()
                .unwrap_or_else(|| CircuitSpec::single(13, 2).expect("static spec"));
            self.model.encoder_dims = match self.model.backbone {
                hqnn_core::model::Backbone::Strict => ModelConfig::strict(template).encoder_dims,
                hqnn_core::model::Backbone::Dual => ModelConfig::dual(template).encoder_dims,
                hqnn_core::model::Backbone::Ann => ModelConfig::ann().encoder_dims,
            };
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.model.validate()?;
        self.train.validate()?;
        if let DatasetSource::Synth { n, .. } = self.dataset {
            if n == 0 {
                return Err(Error::Config("synth dataset needs n >= 1".into()));
            }
        }
        if self.num_splits == 0 {
            return Err(Error::Config("num_splits must be positive".into()));
        }
        if self.expressibility.pairs < 1000 || self.expressibility.bins < 2 {
            return Err(Error::Config(
                "expressibility needs pairs >= 1000 and bins >= 2".into(),
            ));
        }
        Ok(())
    }

    /// Apply the global seed override: one flag repoints every stochastic
    /// component.
    pub fn override_seed(&mut self, seed: u64) {
        if let DatasetSource::Synth { seed: s, .. } = &mut self.dataset {
            *s = seed;
        }
        self.split.seed = seed;
        self.train.seed = seed;
        self.expressibility.seed = seed;
    }
}
