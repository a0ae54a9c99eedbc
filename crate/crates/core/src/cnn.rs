//! Citation Nearest Neighbour classification.
//!
//! A test bag is scored by the labels of its *references* (the `eta_r`
//! training bags closest to it) and its *citers* (training bags that rank the
//! test bag among their own `eta_c` nearest neighbours). The score is the
//! positive fraction of both groups, thresholded at `theta` (inclusive).

use serde::{Deserialize, Serialize};

use crate::data::{Bag, Dataset, FeatureSubset, Label};
use crate::error::{MilError, Result};
use crate::hausdorff::{build_distance_matrix, BagDistances, DistanceMatrix, RankParameter};

/// Parameters of one CNN classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnParams {
    pub eta_r: usize,
    pub eta_c: usize,
    pub d: RankParameter,
    pub theta: f64,
    pub features: FeatureSubset,
}

impl CnnParams {
    /// Checks the parameters against a training set of `train_len` bags with
    /// `dimensionality` features.
    pub fn validate(&self, train_len: usize, dimensionality: usize) -> Result<()> {
        if train_len < 2 {
            return Err(MilError::contract(format!("need at least 2 training bags, got {train_len}")));
        }
        let max_eta = train_len - 1;
        if !(1..=max_eta).contains(&self.eta_r) {
            return Err(MilError::contract(format!("eta_r = {} outside 1..={max_eta}", self.eta_r)));
        }
        if !(1..=max_eta).contains(&self.eta_c) {
            return Err(MilError::contract(format!("eta_c = {} outside 1..={max_eta}", self.eta_c)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(MilError::contract(format!("theta = {} outside (0, 1)", self.theta)));
        }
        self.features.validate(dimensionality)
    }
}

/// Label tallies among references and citers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighbourCounts {
    pub ref_pos: usize,
    pub ref_neg: usize,
    pub cite_pos: usize,
    pub cite_neg: usize,
}

impl NeighbourCounts {
    pub fn score(&self) -> Option<f64> {
        let pos = self.ref_pos + self.cite_pos;
        let total = pos + self.ref_neg + self.cite_neg;
        (total > 0).then(|| pos as f64 / total as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnPrediction {
    pub label: Label,
    pub score: f64,
    pub counts: NeighbourCounts,
}

impl CnnPrediction {
    pub fn from_counts(counts: NeighbourCounts, theta: f64) -> Self {
        match counts.score() {
            Some(score) => {
                CnnPrediction { label: if score >= theta { Label::Positive } else { Label::Negative }, score, counts }
            }
            None => CnnPrediction { label: Label::Negative, score: 0.0, counts },
        }
    }
}

fn tally(labels: impl Iterator<Item = Label>) -> (usize, usize) {
    labels.fold((0, 0), |(p, n), l| if l.is_positive() { (p + 1, n) } else { (p, n + 1) })
}

/// `(positive, negative)` counts among the `eta_r` training bags nearest to
/// the test bag; ties go to the lower training index.
fn count_references(
    t: usize,
    test_dist: impl Fn(usize) -> f64,
    label: impl Fn(usize) -> Label,
    eta_r: usize,
) -> (usize, usize) {
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| test_dist(a).total_cmp(&test_dist(b)).then(a.cmp(&b)));
    tally(order.into_iter().take(eta_r).map(label))
}

/// `(positive, negative)` counts among training bags whose `eta_c` nearest
/// neighbours (excluding themselves) include the test bag. The test bag sorts
/// after every training bag on equal distances.
fn count_citers(
    t: usize,
    test_dist: impl Fn(usize) -> f64,
    train_dist: impl Fn(usize, usize) -> f64,
    label: impl Fn(usize) -> Label,
    eta_c: usize,
) -> (usize, usize) {
    tally((0..t).filter_map(|i| {
        let to_test = test_dist(i);
        let mut closer = 0;
        for k in (0..t).filter(|&k| k != i) {
            if train_dist(k, i) <= to_test {
                closer += 1;
                if closer >= eta_c {
                    return None;
                }
            }
        }
        Some(label(i))
    }))
}

fn check_labels(matrix: &DistanceMatrix, labels: &[Label], eta: usize) -> Result<()> {
    if labels.len() != matrix.train_len() {
        return Err(MilError::contract(format!("{} labels for {} training bags", labels.len(), matrix.train_len())));
    }
    if eta > matrix.train_len() {
        return Err(MilError::contract(format!("neighbourhood {eta} exceeds {} training bags", matrix.train_len())));
    }
    Ok(())
}

/// Reference counts `(positive, negative)` from a `(T+1)×T` matrix.
pub fn find_references(matrix: &DistanceMatrix, labels: &[Label], eta_r: usize) -> Result<(usize, usize)> {
    check_labels(matrix, labels, eta_r)?;
    let row = matrix.test_row();
    Ok(count_references(matrix.train_len(), |j| row[j], |j| labels[j], eta_r))
}

/// Citer counts `(positive, negative)` from a `(T+1)×T` matrix.
pub fn find_citers(matrix: &DistanceMatrix, labels: &[Label], eta_c: usize) -> Result<(usize, usize)> {
    check_labels(matrix, labels, eta_c)?;
    let row = matrix.test_row();
    Ok(count_citers(matrix.train_len(), |j| row[j], |k, i| matrix.get(k, i), |j| labels[j], eta_c))
}

fn predict(
    t: usize,
    test_dist: impl Fn(usize) -> f64 + Copy,
    train_dist: impl Fn(usize, usize) -> f64,
    label: impl Fn(usize) -> Label + Copy,
    params: &CnnParams,
) -> CnnPrediction {
    let (ref_pos, ref_neg) = count_references(t, test_dist, label, params.eta_r);
    let (cite_pos, cite_neg) = count_citers(t, test_dist, train_dist, label, params.eta_c);
    CnnPrediction::from_counts(NeighbourCounts { ref_pos, ref_neg, cite_pos, cite_neg }, params.theta)
}

/// Classifies `test` against the whole training set.
pub fn cnn_classify(train: &Dataset, params: &CnnParams, test: &Bag) -> Result<CnnPrediction> {
    params.validate(train.len(), train.dimensionality())?;
    let matrix = build_distance_matrix(train, test, params.d, &params.features)?;
    Ok(classify_with_matrix(&matrix, &train.labels(), params))
}

/// Classifies from a prebuilt `(T+1)×T` matrix.
pub fn classify_with_matrix(matrix: &DistanceMatrix, labels: &[Label], params: &CnnParams) -> CnnPrediction {
    let row = matrix.test_row();
    predict(matrix.train_len(), |j| row[j], |k, i| matrix.get(k, i), |j| labels[j], params)
}

/// Classifies bag `test` of a dataset using only the bags listed in `train`,
/// reading distances from the dataset-wide matrix.
pub fn classify_subset(
    distances: &BagDistances,
    labels: &[Label],
    train: &[usize],
    test: usize,
    params: &CnnParams,
) -> CnnPrediction {
    debug_assert!(!train.contains(&test));
    predict(
        train.len(),
        |a| distances.get(test, train[a]),
        |a, b| distances.get(train[a], train[b]),
        |a| labels[train[a]],
        params,
    )
}
