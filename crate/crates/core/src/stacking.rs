//! Stacked generalization over a front of CNN classifiers.
//!
//! Each member's out-of-fold predictions form one column of a meta dataset;
//! a kernel classifier trained on those rows combines member votes into the
//! final label. A second NSGA-II search tunes the kernel width, the
//! regularization and which members feed the combiner.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::Mutex;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnn::{cnn_classify, CnnParams};
use crate::data::{Bag, Dataset, FeatureSubset, Label, Normalization};
use crate::error::{MilError, Result};
use crate::hausdorff::NearestPointTable;
use crate::nsga2::{mutate_mask, repair_mask, run_nsga2, sbx, uniform_mask_crossover, GaConfig, SearchSpace};
use crate::optimize::ParetoFront;
use crate::pareto::Objectives;
use crate::svm::{label_of, rbf, rbf_gram, solve_dual, KernelSvm};
use crate::validation::{validate_with_distances, Scheme, ValidationReport};

pub const LOG10_GAMMA_RANGE: (f64, f64) = (-3.0, 3.0);
pub const LOG10_C_RANGE: (f64, f64) = (-2.0, 3.0);
const SBX_INDEX: f64 = 15.0;

/// What each member contributes to a meta row.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaFeatures {
    /// Hard ±1 labels.
    #[default]
    Labels,
    /// Real-valued CNN scores in `[0, 1]`.
    Scores,
}

/// Out-of-fold member predictions, one row per bag and one column per member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaDataset {
    pub t2: Vec<Vec<Label>>,
    pub scores: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub column_params: Vec<CnnParams>,
}

impl MetaDataset {
    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn columns(&self) -> usize {
        self.column_params.len()
    }

    /// Numeric rows restricted to `columns`.
    pub fn feature_rows(&self, columns: &[usize], kind: MetaFeatures) -> Vec<Vec<f64>> {
        (0..self.rows())
            .map(|i| {
                columns
                    .iter()
                    .map(|&j| match kind {
                        MetaFeatures::Labels => self.t2[i][j].as_f64(),
                        MetaFeatures::Scores => self.scores[i][j],
                    })
                    .collect()
            })
            .collect()
    }
}

/// Runs validation for every front member and assembles the meta dataset.
pub fn build_meta_dataset(train: &Dataset, front: &ParetoFront) -> Result<MetaDataset> {
    build_meta_dataset_with(train, front, Scheme::Loo)
}

pub fn build_meta_dataset_with(train: &Dataset, front: &ParetoFront, scheme: Scheme) -> Result<MetaDataset> {
    let params: Vec<CnnParams> = front.members.iter().map(|m| m.params.clone()).collect();
    meta_dataset_for(train, &params, scheme)
}

/// Meta dataset whose columns are the out-of-fold predictions of `members`.
pub fn meta_dataset_for(train: &Dataset, members: &[CnnParams], scheme: Scheme) -> Result<MetaDataset> {
    if members.is_empty() {
        return Err(MilError::contract("front has no members"));
    }
    train.require_both_classes()?;
    let labels = train.labels();

    // one nearest-point table per distinct feature subset
    let mut subsets: Vec<&FeatureSubset> = Vec::new();
    let mut slot: HashMap<&FeatureSubset, usize> = HashMap::new();
    for p in members {
        p.features.validate(train.dimensionality())?;
        slot.entry(&p.features).or_insert_with(|| {
            subsets.push(&p.features);
            subsets.len() - 1
        });
    }
    let tables: Vec<NearestPointTable> =
        subsets.par_iter().map(|s| NearestPointTable::new(train.bags(), s)).collect::<Result<_>>()?;

    let reports = members
        .par_iter()
        .map(|p| {
            let table = &tables[slot[&p.features]];
            validate_with_distances(&table.matrix(p.d), &labels, train.dimensionality(), p, scheme)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = train.len();
    let t2 = (0..n).map(|i| reports.iter().map(|r| r.predictions[i]).collect()).collect();
    let scores = (0..n).map(|i| reports.iter().map(|r| r.scores[i]).collect()).collect();
    Ok(MetaDataset { t2, scores, labels, column_params: members.to_vec() })
}

/// Trains the combiner on every column of `meta`.
pub fn train_final(meta: &MetaDataset, gamma: f64, c: f64) -> Result<KernelSvm> {
    let columns: Vec<usize> = (0..meta.columns()).collect();
    KernelSvm::train(&meta.feature_rows(&columns, MetaFeatures::Labels), &meta.labels, gamma, c)
}

/// Leave-one-row-out accuracies of the combiner. Member columns are not
/// recomputed per fold, so this is an optimistic estimate.
pub fn stack_loo(rows: &[Vec<f64>], labels: &[Label], gamma: f64, c: f64) -> Result<(Objectives, Vec<Label>)> {
    let predictions: Vec<Label> = stack_loo_decisions(rows, labels, gamma, c)?.into_iter().map(label_of).collect();
    Ok((accuracies(labels, &predictions), predictions))
}

/// Held-out decision value of every meta row, refitting the combiner without it.
pub fn stack_loo_decisions(rows: &[Vec<f64>], labels: &[Label], gamma: f64, c: f64) -> Result<Vec<f64>> {
    let n = rows.len();
    if labels.len() != n {
        return Err(MilError::contract(format!("{n} meta rows for {} labels", labels.len())));
    }
    let gram = rbf_gram(rows, gamma);
    let mut decisions = Vec::with_capacity(n);
    for held in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&i| i != held).collect();
        let m = keep.len();
        let mut sub = vec![0.0; m * m];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                sub[a * m + b] = gram[i * n + j];
            }
        }
        let sub_labels: Vec<Label> = keep.iter().map(|&i| labels[i]).collect();
        let sol = solve_dual(&sub, &sub_labels, c)?;
        let decision: f64 = keep
            .iter()
            .zip(&sol.alphas)
            .filter(|(_, &a)| a > 0.0)
            .map(|(&i, &a)| a * labels[i].as_f64() * gram[i * n + held])
            .sum::<f64>()
            + sol.bias;
        decisions.push(decision);
    }
    Ok(decisions)
}

/// Re-estimates a fitted model on its training set: member columns come from
/// `scheme`, and the combiner is refit without each held-out meta row.
/// `scores` of the report hold the combiner's held-out decision values.
pub fn evaluate_model(train: &Dataset, model: &StackedModel, scheme: Scheme) -> Result<ValidationReport> {
    let meta = meta_dataset_for(train, &model.members, scheme)?;
    let columns: Vec<usize> = (0..meta.columns()).collect();
    let rows = meta.feature_rows(&columns, model.meta_features);
    let decisions = stack_loo_decisions(&rows, &meta.labels, model.gamma, model.c)?;
    let predictions: Vec<Label> = decisions.iter().map(|&v| label_of(v)).collect();
    let acc = accuracies(&meta.labels, &predictions);
    Ok(ValidationReport { acc_pos: acc.acc_pos, acc_neg: acc.acc_neg, scheme, predictions, scores: decisions })
}

pub fn accuracies(truth: &[Label], predicted: &[Label]) -> Objectives {
    let count = |class: Label| truth.iter().filter(|&&l| l == class).count();
    let correct = |class: Label| truth.iter().zip(predicted).filter(|(t, p)| **t == class && p == t).count();
    let frac = |class: Label| {
        let n = count(class);
        if n == 0 {
            0.0
        } else {
            correct(class) as f64 / n as f64
        }
    };
    Objectives::new(frac(Label::Positive), frac(Label::Negative))
}

/// Encoded combiner settings: log10 kernel width, log10 regularization and
/// the member subset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StackGenome {
    pub log10_gamma: f64,
    pub log10_c: f64,
    pub mask: Vec<bool>,
}

impl PartialEq for StackGenome {
    fn eq(&self, other: &Self) -> bool {
        self.log10_gamma.to_bits() == other.log10_gamma.to_bits()
            && self.log10_c.to_bits() == other.log10_c.to_bits()
            && self.mask == other.mask
    }
}

impl Eq for StackGenome {}

impl Hash for StackGenome {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.log10_gamma.to_bits().hash(state);
        self.log10_c.to_bits().hash(state);
        self.mask.hash(state);
    }
}

impl StackGenome {
    pub fn gamma(&self) -> f64 {
        10f64.powf(self.log10_gamma)
    }

    pub fn c(&self) -> f64 {
        10f64.powf(self.log10_c)
    }

    pub fn columns(&self) -> Vec<usize> {
        self.mask.iter().enumerate().filter(|(_, &on)| on).map(|(j, _)| j).collect()
    }
}

pub struct StackSpace {
    pub members: usize,
    pub mutation_prob: f64,
}

impl SearchSpace for StackSpace {
    type Genome = StackGenome;

    fn sample(&self, rng: &mut ChaCha8Rng) -> StackGenome {
        let mut mask: Vec<bool> = (0..self.members).map(|_| rng.gen()).collect();
        repair_mask(&mut mask, rng);
        StackGenome {
            log10_gamma: rng.gen_range(LOG10_GAMMA_RANGE.0..=LOG10_GAMMA_RANGE.1),
            log10_c: rng.gen_range(LOG10_C_RANGE.0..=LOG10_C_RANGE.1),
            mask,
        }
    }

    fn crossover(&self, a: &StackGenome, b: &StackGenome, rng: &mut ChaCha8Rng) -> (StackGenome, StackGenome) {
        let (g1, g2) = sbx(a.log10_gamma, b.log10_gamma, LOG10_GAMMA_RANGE.0, LOG10_GAMMA_RANGE.1, SBX_INDEX, rng);
        let (c1, c2) = sbx(a.log10_c, b.log10_c, LOG10_C_RANGE.0, LOG10_C_RANGE.1, SBX_INDEX, rng);
        let (mut m1, mut m2) = uniform_mask_crossover(&a.mask, &b.mask, rng);
        repair_mask(&mut m1, rng);
        repair_mask(&mut m2, rng);
        (StackGenome { log10_gamma: g1, log10_c: c1, mask: m1 }, StackGenome { log10_gamma: g2, log10_c: c2, mask: m2 })
    }

    fn mutate(&self, g: &mut StackGenome, rng: &mut ChaCha8Rng) {
        let step = |v: f64, (lo, hi): (f64, f64), rng: &mut ChaCha8Rng| {
            let w = 0.1 * (hi - lo);
            (v + rng.gen_range(-w..=w)).clamp(lo, hi)
        };
        if rng.gen::<f64>() < self.mutation_prob {
            g.log10_gamma = step(g.log10_gamma, LOG10_GAMMA_RANGE, rng);
        }
        if rng.gen::<f64>() < self.mutation_prob {
            g.log10_c = step(g.log10_c, LOG10_C_RANGE, rng);
        }
        mutate_mask(&mut g.mask, rng);
    }
}

/// One combiner configuration on the stacking front.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackSolution {
    pub gamma: f64,
    pub c: f64,
    /// Meta-dataset columns (front member indices) fed to the combiner.
    pub columns: Vec<usize>,
    pub acc_pos: f64,
    pub acc_neg: f64,
}

impl StackSolution {
    pub fn objectives(&self) -> Objectives {
        Objectives::new(self.acc_pos, self.acc_neg)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StackFront {
    pub members: Vec<StackSolution>,
}

impl StackFront {
    pub fn objectives(&self) -> Vec<Objectives> {
        self.members.iter().map(StackSolution::objectives).collect()
    }

    /// The solution with the best worse-class accuracy; ties go to the larger sum.
    pub fn most_balanced(&self) -> Option<&StackSolution> {
        self.members.iter().max_by(|a, b| {
            let key = |s: &StackSolution| (s.objectives().min(), s.acc_pos + s.acc_neg);
            let (ka, kb) = (key(a), key(b));
            ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(std::cmp::Ordering::Greater)
        })
    }
}

/// NSGA-II over combiner settings, scored by leave-one-row-out on the meta dataset.
pub fn tune_stack(meta: &MetaDataset, config: &GaConfig, seed: u64) -> Result<StackFront> {
    tune_stack_with(meta, config, seed, MetaFeatures::Labels)
}

pub fn tune_stack_with(meta: &MetaDataset, config: &GaConfig, seed: u64, kind: MetaFeatures) -> Result<StackFront> {
    config.validate()?;
    if meta.columns() == 0 {
        return Err(MilError::contract("meta dataset has no columns"));
    }
    let space = StackSpace { members: meta.columns(), mutation_prob: config.mutation_prob };
    let memo: Mutex<HashMap<StackGenome, Objectives>> = Mutex::new(HashMap::new());

    let evaluate = |batch: &[StackGenome]| -> Result<Vec<Objectives>> {
        let mut pending: Vec<&StackGenome> = Vec::new();
        {
            let seen = memo.lock().expect("memo lock");
            let mut queued = std::collections::HashSet::new();
            for g in batch {
                if !seen.contains_key(g) && queued.insert(g) {
                    pending.push(g);
                }
            }
        }
        let computed = pending
            .par_iter()
            .map(|g| {
                let rows = meta.feature_rows(&g.columns(), kind);
                stack_loo(&rows, &meta.labels, g.gamma(), g.c()).map(|(o, _)| ((*g).clone(), o))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut seen = memo.lock().expect("memo lock");
        seen.extend(computed);
        Ok(batch.iter().map(|g| seen[g]).collect())
    };

    let evolution = run_nsga2(&space, config, seed, evaluate)?;
    let mut members: Vec<StackSolution> = evolution
        .first_front()
        .into_iter()
        .map(|ind| StackSolution {
            gamma: ind.genome.gamma(),
            c: ind.genome.c(),
            columns: ind.genome.columns(),
            acc_pos: ind.objectives.acc_pos,
            acc_neg: ind.objectives.acc_neg,
        })
        .collect();
    members.sort_by(|a, b| b.acc_neg.total_cmp(&a.acc_neg).then(a.acc_pos.total_cmp(&b.acc_pos)));
    Ok(StackFront { members })
}

/// The deployable ensemble: member classifiers plus the trained combiner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackedModel {
    pub members: Vec<CnnParams>,
    pub gamma: f64,
    pub c: f64,
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub normalization: Option<Normalization>,
    pub support_rows: Vec<Vec<f64>>,
    pub support_labels: Vec<Label>,
    #[serde(default)]
    pub meta_features: MetaFeatures,
}

impl StackedModel {
    /// Trains the combiner of `solution` on all meta rows.
    pub fn fit(
        meta: &MetaDataset,
        solution: &StackSolution,
        normalization: Option<Normalization>,
        kind: MetaFeatures,
    ) -> Result<Self> {
        if solution.columns.is_empty() {
            return Err(MilError::contract("stacked model needs at least one member"));
        }
        if let Some(&bad) = solution.columns.iter().find(|&&j| j >= meta.columns()) {
            return Err(MilError::contract(format!("column {bad} out of range")));
        }
        let rows = meta.feature_rows(&solution.columns, kind);
        let svm = KernelSvm::train(&rows, &meta.labels, solution.gamma, solution.c)?;
        Ok(StackedModel {
            members: solution.columns.iter().map(|&j| meta.column_params[j].clone()).collect(),
            gamma: svm.gamma,
            c: svm.c,
            alphas: svm.alphas,
            bias: svm.bias,
            normalization,
            support_rows: svm.support_rows,
            support_labels: svm.support_labels,
            meta_features: kind,
        })
    }

    pub fn combiner(&self) -> KernelSvm {
        KernelSvm {
            gamma: self.gamma,
            c: self.c,
            alphas: self.alphas.clone(),
            bias: self.bias,
            support_rows: self.support_rows.clone(),
            support_labels: self.support_labels.clone(),
        }
    }

    fn decision(&self, x: &[f64]) -> f64 {
        self.alphas
            .iter()
            .zip(&self.support_rows)
            .zip(&self.support_labels)
            .filter(|((a, _), _)| **a > 0.0)
            .map(|((a, row), l)| a * l.as_f64() * rbf(self.gamma, row, x))
            .sum::<f64>()
            + self.bias
    }
}

/// Classifies `test` with every member against the full training set, then
/// combines the member outputs.
pub fn predict_bag(model: &StackedModel, train: &Dataset, test: &Bag) -> Result<Label> {
    if test.dim() != train.dimensionality() {
        return Err(MilError::contract(format!(
            "bag {:?} has {} features, training set has {}",
            test.id(),
            test.dim(),
            train.dimensionality()
        )));
    }
    if model.members.is_empty() || model.support_rows.first().map(Vec::len) != Some(model.members.len()) {
        return Err(MilError::contract("model combiner width does not match its member count"));
    }
    let features = model
        .members
        .iter()
        .map(|p| {
            cnn_classify(train, p, test).map(|pred| match model.meta_features {
                MetaFeatures::Labels => pred.label.as_f64(),
                MetaFeatures::Scores => pred.score,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(label_of(model.decision(&features)))
}
