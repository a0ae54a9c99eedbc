//! Bags, datasets and ingestion of the UCI Musk "clean1" layout.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MilError, Result};

/// Number of comma-separated fields in a Musk row: molecule, conformation, 166 features, class.
pub const MUSK_FIELDS: usize = 169;
/// Feature count of the Musk layout.
pub const MUSK_FEATURES: usize = 166;

/// Binary bag label, stored as `-1` / `+1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn sign(self) -> i8 {
        match self {
            Label::Negative => -1,
            Label::Positive => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.sign())
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    /// The `Class 0` / `Class 1` vocabulary used in reports.
    pub fn class_name(self) -> &'static str {
        match self {
            Label::Negative => "Class 0",
            Label::Positive => "Class 1",
        }
    }
}

impl From<Label> for i8 {
    fn from(label: Label) -> i8 {
        label.sign()
    }
}

impl TryFrom<i8> for Label {
    type Error = String;

    fn try_from(value: i8) -> std::result::Result<Self, Self::Error> {
        match value {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(format!("label must be -1 or +1, got {other}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Negative => f.write_str("-1"),
            Label::Positive => f.write_str("+1"),
        }
    }
}

/// One feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Instance(pub Vec<f64>);

impl Instance {
    pub fn features(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for Instance {
    fn from(v: Vec<f64>) -> Self {
        Instance(v)
    }
}

/// A labeled, non-empty collection of instances sharing one dimensionality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bag {
    id: String,
    label: Label,
    instances: Vec<Instance>,
}

impl Bag {
    pub fn new(id: impl Into<String>, label: Label, instances: Vec<Instance>) -> Result<Self> {
        let id = id.into();
        let Some(first) = instances.first() else {
            return Err(MilError::contract(format!("bag {id:?} has no instances")));
        };
        let dim = first.dim();
        if dim == 0 {
            return Err(MilError::contract(format!("bag {id:?} has zero-length instances")));
        }
        for (k, inst) in instances.iter().enumerate() {
            if inst.dim() != dim {
                return Err(MilError::contract(format!(
                    "bag {id:?}: instance {k} has {} features, expected {dim}",
                    inst.dim()
                )));
            }
            if inst.0.iter().any(|v| !v.is_finite()) {
                return Err(MilError::contract(format!("bag {id:?}: instance {k} has a non-finite feature")));
            }
        }
        Ok(Bag { id, label, instances })
    }

    /// Convenience constructor from raw rows.
    pub fn from_rows(id: impl Into<String>, label: Label, rows: Vec<Vec<f64>>) -> Result<Self> {
        Bag::new(id, label, rows.into_iter().map(Instance).collect())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.instances[0].dim()
    }
}

impl<'de> Deserialize<'de> for Bag {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            id: String,
            label: Label,
            instances: Vec<Instance>,
        }
        let raw = Raw::deserialize(deserializer)?;
        Bag::new(raw.id, raw.label, raw.instances).map_err(serde::de::Error::custom)
    }
}

/// Observed `(min, max)` of one feature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
}

impl From<(f64, f64)> for FeatureRange {
    fn from((min, max): (f64, f64)) -> Self {
        FeatureRange { min, max }
    }
}

impl From<FeatureRange> for (f64, f64) {
    fn from(r: FeatureRange) -> Self {
        (r.min, r.max)
    }
}

impl FeatureRange {
    fn scale(&self, value: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            ((value - self.min) / span).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Per-feature min-max scaling recorded at ingestion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Normalization(pub Vec<FeatureRange>);

impl Normalization {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ranges(&self) -> &[FeatureRange] {
        &self.0
    }
}

/// A collection of bags with unique ids and a common dimensionality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dataset {
    dimensionality: usize,
    normalization: Option<Normalization>,
    bags: Vec<Bag>,
}

impl Dataset {
    pub fn new(bags: Vec<Bag>) -> Result<Self> {
        let Some(first) = bags.first() else {
            return Err(MilError::contract("dataset has no bags"));
        };
        let dim = first.dim();
        Self::with_parts(dim, None, bags)
    }

    fn with_parts(dimensionality: usize, normalization: Option<Normalization>, bags: Vec<Bag>) -> Result<Self> {
        if dimensionality == 0 {
            return Err(MilError::contract("dimensionality must be positive"));
        }
        let mut seen = HashSet::with_capacity(bags.len());
        for bag in &bags {
            if bag.dim() != dimensionality {
                return Err(MilError::contract(format!(
                    "bag {:?} has dimensionality {}, dataset has {dimensionality}",
                    bag.id(),
                    bag.dim()
                )));
            }
            if !seen.insert(bag.id()) {
                return Err(MilError::DataIntegrity(format!("duplicate bag id {:?}", bag.id())));
            }
        }
        if let Some(norm) = &normalization {
            if norm.len() != dimensionality {
                return Err(MilError::contract(format!(
                    "normalization has {} ranges, dataset has {dimensionality} features",
                    norm.len()
                )));
            }
        }
        Ok(Dataset { dimensionality, normalization, bags })
    }

    pub fn dimensionality(&self) -> usize {
        self.dimensionality
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.bags.iter().map(Bag::label).collect()
    }

    pub fn positive_count(&self) -> usize {
        self.bags.iter().filter(|b| b.label().is_positive()).count()
    }

    pub fn negative_count(&self) -> usize {
        self.len() - self.positive_count()
    }

    pub fn instance_count(&self) -> usize {
        self.bags.iter().map(Bag::len).sum()
    }

    pub fn bag(&self, id: &str) -> Option<&Bag> {
        self.bags.iter().find(|b| b.id() == id)
    }

    /// Fails unless both classes are present.
    pub fn require_both_classes(&self) -> Result<()> {
        if self.positive_count() == 0 || self.negative_count() == 0 {
            return Err(MilError::contract(format!(
                "both classes required, got {} positive / {} negative bags",
                self.positive_count(),
                self.negative_count()
            )));
        }
        Ok(())
    }

    /// The sub-dataset made of the bags at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let bags = indices
            .iter()
            .map(|&i| {
                self.bags.get(i).cloned().ok_or_else(|| MilError::contract(format!("bag index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        if bags.is_empty() {
            return Err(MilError::contract("empty subset"));
        }
        Dataset::with_parts(self.dimensionality, self.normalization.clone(), bags)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Dataset> {
        Ok(serde_json::from_str(text)?)
    }
}

impl<'de> Deserialize<'de> for Dataset {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dimensionality: usize,
            #[serde(default)]
            normalization: Option<Normalization>,
            bags: Vec<Bag>,
        }
        let raw = Raw::deserialize(deserializer)?;
        Dataset::with_parts(raw.dimensionality, raw.normalization, raw.bags).map_err(serde::de::Error::custom)
    }
}

/// A non-empty, sorted set of feature indices (0-based).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureSubset(Vec<usize>);

impl FeatureSubset {
    pub fn new(mut indices: Vec<usize>, dimensionality: usize) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(MilError::contract("feature subset is empty"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= dimensionality) {
            return Err(MilError::contract(format!(
                "feature index {bad} out of range for dimensionality {dimensionality}"
            )));
        }
        Ok(FeatureSubset(indices))
    }

    pub fn all(dimensionality: usize) -> Self {
        assert!(dimensionality > 0, "dimensionality must be positive");
        FeatureSubset((0..dimensionality).collect())
    }

    pub fn from_mask(mask: &[bool]) -> Result<Self> {
        let indices = mask.iter().enumerate().filter(|(_, &on)| on).map(|(i, _)| i).collect();
        FeatureSubset::new(indices, mask.len())
    }

    pub fn to_mask(&self, dimensionality: usize) -> Vec<bool> {
        let mut mask = vec![false; dimensionality];
        for &i in &self.0 {
            mask[i] = true;
        }
        mask
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks the subset against a dimensionality (deserialized subsets skip `new`).
    pub fn validate(&self, dimensionality: usize) -> Result<()> {
        FeatureSubset::new(self.0.clone(), dimensionality).and_then(|s| {
            if s == *self {
                Ok(())
            } else {
                Err(MilError::contract("feature subset is not sorted and unique"))
            }
        })
    }
}

/// Loads a Musk "clean1" file, grouping rows into bags by molecule name.
pub fn load_musk_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| MilError::Io { path: path.to_path_buf(), source })?;
    parse_musk_csv(file)
}

/// Parses Musk rows from any reader. See [`load_musk_csv`].
pub fn parse_musk_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);

    // molecule -> (label, first line, rows), in order of first appearance
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (Label, usize, Vec<Instance>)> = HashMap::new();

    for record in rdr.records() {
        let record = record.map_err(|e| MilError::Ingestion {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != MUSK_FIELDS {
            return Err(MilError::Ingestion {
                line,
                message: format!("expected {MUSK_FIELDS} fields, found {}", record.len()),
            });
        }
        let molecule = &record[0];
        if molecule.is_empty() {
            return Err(MilError::Ingestion { line, message: "empty molecule name".into() });
        }
        let mut features = Vec::with_capacity(MUSK_FEATURES);
        for (k, field) in record.iter().skip(2).take(MUSK_FEATURES).enumerate() {
            let value: f64 = field.parse().map_err(|_| MilError::Ingestion {
                line,
                message: format!("feature {} is not numeric: {field:?}", k + 1),
            })?;
            if !value.is_finite() {
                return Err(MilError::Ingestion { line, message: format!("feature {} is not finite", k + 1) });
            }
            features.push(value);
        }
        let label = match &record[MUSK_FIELDS - 1] {
            "1" | "1.0" => Label::Positive,
            "0" | "0.0" => Label::Negative,
            other => {
                return Err(MilError::Ingestion { line, message: format!("class flag must be 0 or 1, got {other:?}") })
            }
        };

        match groups.get_mut(molecule) {
            Some((existing, first_line, rows)) => {
                if *existing != label {
                    return Err(MilError::DataIntegrity(format!(
                        "molecule {molecule:?} has class {} at line {first_line} but {} at line {line}",
                        class_flag(*existing),
                        class_flag(label)
                    )));
                }
                rows.push(Instance(features));
            }
            None => {
                order.push(molecule.to_string());
                groups.insert(molecule.to_string(), (label, line, vec![Instance(features)]));
            }
        }
    }

    if order.is_empty() {
        return Err(MilError::Ingestion { line: 1, message: "file contains no rows".into() });
    }

    let bags = order
        .into_iter()
        .map(|name| {
            let (label, _, rows) = groups.remove(&name).expect("grouped molecule");
            Bag::new(name, label, rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(bags)
}

fn class_flag(label: Label) -> u8 {
    u8::from(label.is_positive())
}

/// Rescales every feature to `[0, 1]` using its range over all instances.
///
/// Constant features map to 0. If `data` already carries a normalization, the
/// recorded ranges are composed so they still map the original raw values.
pub fn normalize_minmax(data: &Dataset) -> Dataset {
    let m = data.dimensionality;
    let mut ranges = vec![FeatureRange { min: f64::INFINITY, max: f64::NEG_INFINITY }; m];
    for inst in data.bags.iter().flat_map(|b| b.instances.iter()) {
        for (r, &v) in ranges.iter_mut().zip(&inst.0) {
            r.min = r.min.min(v);
            r.max = r.max.max(v);
        }
    }

    let bags = data
        .bags
        .iter()
        .map(|bag| Bag {
            id: bag.id.clone(),
            label: bag.label,
            instances: bag
                .instances
                .iter()
                .map(|inst| Instance(inst.0.iter().zip(&ranges).map(|(&v, r)| r.scale(v)).collect()))
                .collect(),
        })
        .collect();

    let recorded = match &data.normalization {
        None => ranges,
        Some(prior) => prior
            .0
            .iter()
            .zip(&ranges)
            .map(|(outer, inner)| {
                let span = outer.max - outer.min;
                // endpoints map back exactly
                let compose = |t: f64| {
                    if t == 0.0 {
                        outer.min
                    } else if t == 1.0 {
                        outer.max
                    } else {
                        outer.min + t * span
                    }
                };
                FeatureRange { min: compose(inner.min), max: compose(inner.max) }
            })
            .collect(),
    };

    Dataset { dimensionality: m, normalization: Some(Normalization(recorded)), bags }
}

/// Applies recorded training ranges to an unseen bag, clamping to `[0, 1]`.
pub fn apply_normalization(bag: &Bag, normalization: &Normalization) -> Result<Bag> {
    if bag.dim() != normalization.len() {
        return Err(MilError::contract(format!(
            "bag {:?} has {} features, normalization has {}",
            bag.id(),
            bag.dim(),
            normalization.len()
        )));
    }
    Ok(Bag {
        id: bag.id.clone(),
        label: bag.label,
        instances: bag
            .instances
            .iter()
            .map(|inst| Instance(inst.0.iter().zip(&normalization.0).map(|(&v, r)| r.scale(v)).collect()))
            .collect(),
    })
}
