use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cnnmil::{GaConfig, Scheme};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Settings for one experiment. Every field has a default so a config file
/// only needs the keys it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Musk CSV or canonical dataset JSON.
    pub dataset: Option<PathBuf>,
    /// Min-max scale features when reading a raw CSV.
    pub normalize: bool,
    /// Search over CNN configurations.
    pub stage1: GaConfig,
    /// Search over combiner settings.
    pub stage2: GaConfig,
    pub validation: Scheme,
    pub out: PathBuf,
    /// Overrides the per-stage `seed` values when set.
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            normalize: true,
            stage1: GaConfig::default(),
            stage2: GaConfig::default(),
            validation: Scheme::Loo,
            out: PathBuf::from("out"),
            seed: None,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub kfold: Option<usize>,
    pub dataset: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if overrides.seed.is_some() {
            config.seed = overrides.seed;
        }
        if let Some(out) = &overrides.out {
            config.out = out.clone();
        }
        if let Some(dataset) = &overrides.dataset {
            config.dataset = Some(dataset.clone());
        }
        if let Some(k) = overrides.kfold {
            config.validation = Scheme::KFold { k, seed: config.stage_seed(&config.stage1) };
        }
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<()> {
        self.stage1.validate().context("stage1 settings")?;
        self.stage2.validate().context("stage2 settings")?;
        if let Scheme::KFold { k, .. } = self.validation {
            if k < 2 {
                bail!("--kfold must be at least 2, got {k}");
            }
        }
        if let Some(path) = &self.dataset {
            if !path.exists() {
                bail!("dataset {} does not exist", path.display());
            }
        }
        Ok(())
    }

    /// Seed for one search stage: the global seed if set, else the stage's own.
    pub fn stage_seed(&self, stage: &GaConfig) -> u64 {
        self.seed.unwrap_or(stage.seed)
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        self.dataset.as_deref().context("no dataset given (use --dataset or the config's \"dataset\" key)")
    }

    /// Hex SHA-256 of the settings that influence results. The output
    /// directory is left out so identical runs into different directories
    /// produce identical artifacts.
    pub fn digest(&self) -> String {
        let view = serde_json::json!({
            "dataset": self.dataset,
            "normalize": self.normalize,
            "stage1": self.stage1,
            "stage2": self.stage2,
            "validation": self.validation,
            "seed": self.seed,
        });
        hex::encode(Sha256::digest(view.to_string().as_bytes()))
    }
}
