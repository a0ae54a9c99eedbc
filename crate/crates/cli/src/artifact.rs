//! On-disk formats written and read by the commands. Every written file
//! carries a [`Provenance`] block.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use cnnmil::{
    load_musk_csv, normalize_minmax, Dataset, FrontMember, MetaFeatures, Scheme, StackSolution, StackedModel,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const DATASET_FILE: &str = "dataset.json";
pub const FRONT_FILE: &str = "front.json";
pub const FRONT_TABLE: &str = "front_table";
pub const STACK_FILE: &str = "stack_front.json";
pub const STACK_TABLE: &str = "stack_table";
pub const MODEL_FILE: &str = "model.json";
pub const EVALUATION_FILE: &str = "evaluation.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub seed: u64,
    pub config_digest: String,
}

impl Provenance {
    pub fn new(config: &RunConfig, seed: u64) -> Self {
        Provenance { tool_version: env!("CARGO_PKG_VERSION").to_string(), seed, config_digest: config.digest() }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(flatten)]
    pub dataset: Dataset,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FrontFile {
    pub provenance: Provenance,
    pub validation: Scheme,
    pub front: Vec<FrontMember>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StackFrontFile {
    pub provenance: Provenance,
    pub validation: Scheme,
    pub meta_features: MetaFeatures,
    /// Objectives are leave-one-row-out estimates on member predictions that
    /// were themselves chosen on the same bags, so they are optimistic.
    pub estimate: String,
    pub front: Vec<StackSolution>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub provenance: Provenance,
    #[serde(flatten)]
    pub model: StackedModel,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn looks_like_json(path: &Path) -> Result<bool> {
    let text = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{'))
}

/// Loads canonical dataset JSON as written, or a raw Musk CSV, scaling the
/// latter when `normalize` is set.
pub fn load_dataset(path: &Path, normalize: bool) -> Result<Dataset> {
    if looks_like_json(path)? {
        return Ok(read_json::<DatasetFile>(path)?.dataset);
    }
    let raw = load_musk_csv(path).with_context(|| format!("ingesting {}", path.display()))?;
    Ok(if normalize { normalize_minmax(&raw) } else { raw })
}

/// Like [`load_dataset`], but canonical JSON is also rescaled so that
/// re-ingesting an ingested file reproduces it.
pub fn ingest_dataset(path: &Path, normalize: bool) -> Result<Dataset> {
    let data = load_dataset(path, normalize)?;
    Ok(if normalize && looks_like_json(path)? { normalize_minmax(&data) } else { data })
}

/// Bags to classify: canonical JSON is used as is, a raw Musk CSV is mapped
/// through the model's training normalization.
pub fn load_query_bags(path: &Path, model: &StackedModel) -> Result<Vec<cnnmil::Bag>> {
    if looks_like_json(path)? {
        return Ok(read_json::<DatasetFile>(path)?.dataset.bags().to_vec());
    }
    let raw = load_musk_csv(path).with_context(|| format!("ingesting {}", path.display()))?;
    match &model.normalization {
        Some(norm) => raw.bags().iter().map(|b| cnnmil::apply_normalization(b, norm).map_err(Into::into)).collect(),
        None => Ok(raw.bags().to_vec()),
    }
}

pub fn summary_line(data: &Dataset) -> String {
    format!(
        "{} bags ({} pos / {} neg), {} instances, {} features",
        data.len(),
        data.positive_count(),
        data.negative_count(),
        data.instance_count(),
        data.dimensionality()
    )
}
