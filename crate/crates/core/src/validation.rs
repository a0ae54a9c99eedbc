//! Leave-one-out and stratified k-fold estimates of per-class accuracy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cnn::{classify_subset, CnnParams};
use crate::data::{Dataset, Label};
use crate::error::{MilError, Result};
use crate::hausdorff::BagDistances;

/// How bags are split into training and validation subsamples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheme {
    Loo,
    KFold { k: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub acc_pos: f64,
    pub acc_neg: f64,
    pub scheme: Scheme,
    /// Out-of-fold label for every bag, in dataset order.
    pub predictions: Vec<Label>,
    /// Out-of-fold classifier score for every bag.
    pub scores: Vec<f64>,
}

impl ValidationReport {
    pub fn objectives(&self) -> (f64, f64) {
        (self.acc_pos, self.acc_neg)
    }
}

/// The held-out bag indices of every fold.
pub fn fold_plan(labels: &[Label], scheme: Scheme) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    match scheme {
        Scheme::Loo => Ok((0..n).map(|i| vec![i]).collect()),
        Scheme::KFold { k, seed } => {
            if k < 2 || k > n {
                return Err(MilError::contract(format!("k = {k} must lie in 2..={n}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut folds = vec![Vec::new(); k];
            let mut next = 0;
            for class in [Label::Positive, Label::Negative] {
                let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
                members.shuffle(&mut rng);
                // the counter continues across classes so k = N yields singleton folds
                for i in members {
                    folds[next % k].push(i);
                    next += 1;
                }
            }
            for fold in &mut folds {
                fold.sort_unstable();
            }
            Ok(folds)
        }
    }
}

/// Training indices complementary to one fold, ascending.
pub fn training_indices(n: usize, held_out: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !held_out.contains(i)).collect()
}

fn check_training_portion(labels: &[Label], train: &[usize]) -> Result<()> {
    let pos = train.iter().filter(|&&i| labels[i].is_positive()).count();
    if pos == 0 || pos == train.len() {
        return Err(MilError::contract(format!("training portion of {} bags is missing a class", train.len())));
    }
    Ok(())
}

/// Runs a validation scheme against a precomputed dataset-wide distance matrix.
///
/// `distances` must have been computed with `params.d` and `params.features`.
pub fn validate_with_distances(
    distances: &BagDistances,
    labels: &[Label],
    dimensionality: usize,
    params: &CnnParams,
    scheme: Scheme,
) -> Result<ValidationReport> {
    let n = labels.len();
    if distances.len() != n {
        return Err(MilError::contract(format!("{} labels for a {}-bag distance matrix", n, distances.len())));
    }
    if n < 3 {
        return Err(MilError::contract(format!("validation needs at least 3 bags, got {n}")));
    }
    let n_pos = labels.iter().filter(|l| l.is_positive()).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MilError::contract("validation requires both classes"));
    }

    let folds = fold_plan(labels, scheme)?;
    let mut predictions = vec![Label::Negative; n];
    let mut scores = vec![0.0; n];
    for held_out in &folds {
        let train = training_indices(n, held_out);
        check_training_portion(labels, &train)?;
        params.validate(train.len(), dimensionality)?;
        for &i in held_out {
            let pred = classify_subset(distances, labels, &train, i, params);
            predictions[i] = pred.label;
            scores[i] = pred.score;
        }
    }

    let (mut a_pos, mut a_neg) = (0usize, 0usize);
    for (truth, pred) in labels.iter().zip(&predictions) {
        if truth == pred {
            if truth.is_positive() {
                a_pos += 1;
            } else {
                a_neg += 1;
            }
        }
    }
    Ok(ValidationReport {
        acc_pos: a_pos as f64 / n_pos as f64,
        acc_neg: a_neg as f64 / n_neg as f64,
        scheme,
        predictions,
        scores,
    })
}

/// Leave-one-out validation: each bag classified by the other `N - 1`.
pub fn loo_validate(train: &Dataset, params: &CnnParams) -> Result<ValidationReport> {
    validate(train, params, Scheme::Loo)
}

/// Stratified k-fold validation with a seeded fold assignment.
pub fn kfold_validate(train: &Dataset, params: &CnnParams, k: usize, seed: u64) -> Result<ValidationReport> {
    validate(train, params, Scheme::KFold { k, seed })
}

pub fn validate(train: &Dataset, params: &CnnParams, scheme: Scheme) -> Result<ValidationReport> {
    train.require_both_classes()?;
    params.features.validate(train.dimensionality())?;
    let distances = BagDistances::compute(train, params.d, &params.features)?;
    validate_with_distances(&distances, &train.labels(), train.dimensionality(), params, scheme)
}
