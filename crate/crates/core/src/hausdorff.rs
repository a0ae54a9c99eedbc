//! Rank-d (minimal) Hausdorff distance between bags.
//!
//! The directed distance from bag `A` to bag `B` takes, for every point of `A`,
//! its distance to the nearest point of `B`, ranks those values in ascending
//! order and returns the d-th one (`d` clamped to `|A|`). `d = |A|` is the
//! classic max-min directed Hausdorff distance, `d = 1` is the minimal
//! point-pair distance.
//! The symmetric distance is the max of both directions.
//!
//! Nearest-point searches work on squared Euclidean distances and take the
//! square root only of the selected value. `sqrt` is correctly rounded and
//! monotone, so the result is bit-identical to taking roots first.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Bag, Dataset, FeatureSubset, Instance};
use crate::error::{MilError, Result};

/// Rank used by the directed distance; always at least 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct RankParameter(usize);

impl RankParameter {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(MilError::contract("rank d must be at least 1"));
        }
        Ok(RankParameter(d))
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Rank clamped to a bag of `len` points.
    pub fn effective(self, len: usize) -> usize {
        self.0.min(len)
    }
}

impl TryFrom<usize> for RankParameter {
    type Error = MilError;
    fn try_from(d: usize) -> Result<Self> {
        RankParameter::new(d)
    }
}

impl From<RankParameter> for usize {
    fn from(d: RankParameter) -> usize {
        d.0
    }
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

fn check_subset(s: &FeatureSubset, dim: usize) -> Result<()> {
    if s.is_empty() {
        return Err(MilError::contract("feature subset is empty"));
    }
    match s.indices().last() {
        Some(&last) if last >= dim => {
            Err(MilError::contract(format!("feature index {last} out of range for dimensionality {dim}")))
        }
        _ => Ok(()),
    }
}

/// Euclidean distance between two instances restricted to the features in `s`.
pub fn instance_distance(a: &Instance, b: &Instance, s: &FeatureSubset) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(MilError::contract(format!("instance dimensionalities differ: {} vs {}", a.dim(), b.dim())));
    }
    check_subset(s, a.dim())?;
    let (a, b) = (a.features(), b.features());
    let mut acc = 0.0;
    for &k in s.indices() {
        let diff = a[k] - b[k];
        acc += diff * diff;
    }
    Ok(acc.sqrt())
}

/// A bag's instances restricted to a feature subset, stored contiguously.
#[derive(Clone, Debug)]
pub struct ProjectedBag {
    width: usize,
    values: Vec<f64>,
}

impl ProjectedBag {
    pub fn new(bag: &Bag, s: &FeatureSubset) -> Self {
        let idx = s.indices();
        let mut values = Vec::with_capacity(bag.len() * idx.len());
        for inst in bag.instances() {
            let f = inst.features();
            values.extend(idx.iter().map(|&k| f[k]));
        }
        ProjectedBag { width: idx.len(), values }
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.width)
    }
}

/// Squared nearest-point distances in both directions, each sorted ascending.
fn nearest_squared(a: &ProjectedBag, b: &ProjectedBag) -> (Vec<f64>, Vec<f64>) {
    let mut a_to_b = vec![f64::INFINITY; a.len()];
    let mut b_to_a = vec![f64::INFINITY; b.len()];
    for (i, p) in a.points().enumerate() {
        for (j, q) in b.points().enumerate() {
            let sq = squared_distance(p, q);
            if sq < a_to_b[i] {
                a_to_b[i] = sq;
            }
            if sq < b_to_a[j] {
                b_to_a[j] = sq;
            }
        }
    }
    a_to_b.sort_unstable_by(f64::total_cmp);
    b_to_a.sort_unstable_by(f64::total_cmp);
    (a_to_b, b_to_a)
}

#[inline]
fn rank_select(sorted: &[f64], d: RankParameter) -> f64 {
    sorted[d.effective(sorted.len()) - 1].sqrt()
}

fn check_pair(a: &Bag, b: &Bag, s: &FeatureSubset) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(MilError::contract(format!("bags {:?} and {:?} have different dimensionality", a.id(), b.id())));
    }
    check_subset(s, a.dim())
}

/// Directed rank-d distance from `a` to `b`.
pub fn directed_rank_hausdorff(a: &Bag, b: &Bag, d: RankParameter, s: &FeatureSubset) -> Result<f64> {
    check_pair(a, b, s)?;
    let (a_to_b, _) = nearest_squared(&ProjectedBag::new(a, s), &ProjectedBag::new(b, s));
    Ok(rank_select(&a_to_b, d))
}

/// Symmetric rank-d Hausdorff distance `max(h_d(a, b), h_d(b, a))`.
pub fn rank_hausdorff(a: &Bag, b: &Bag, d: RankParameter, s: &FeatureSubset) -> Result<f64> {
    check_pair(a, b, s)?;
    let (a_to_b, b_to_a) = nearest_squared(&ProjectedBag::new(a, s), &ProjectedBag::new(b, s));
    Ok(rank_select(&a_to_b, d).max(rank_select(&b_to_a, d)))
}

/// Nearest-point distance lists for every ordered pair of a bag collection
/// under one feature subset. Any rank `d` can be read off without touching
/// instances again.
#[derive(Clone, Debug)]
pub struct NearestPointTable {
    n: usize,
    // entry [i * n + j]: squared nearest distances from bag i's points to bag j, ascending
    lists: Vec<Vec<f64>>,
}

impl NearestPointTable {
    pub fn new(bags: &[Bag], s: &FeatureSubset) -> Result<Self> {
        let Some(first) = bags.first() else {
            return Err(MilError::contract("no bags"));
        };
        let dim = first.dim();
        check_subset(s, dim)?;
        if let Some(bad) = bags.iter().find(|b| b.dim() != dim) {
            return Err(MilError::contract(format!(
                "bag {:?} has dimensionality {}, expected {dim}",
                bad.id(),
                bad.dim()
            )));
        }
        let projected: Vec<ProjectedBag> = bags.iter().map(|b| ProjectedBag::new(b, s)).collect();
        let n = bags.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let computed: Vec<(Vec<f64>, Vec<f64>)> =
            pairs.par_iter().map(|&(i, j)| nearest_squared(&projected[i], &projected[j])).collect();

        let mut lists = vec![Vec::new(); n * n];
        for (i, p) in projected.iter().enumerate() {
            lists[i * n + i] = vec![0.0; p.len()];
        }
        for (&(i, j), (ij, ji)) in pairs.iter().zip(computed) {
            lists[i * n + j] = ij;
            lists[j * n + i] = ji;
        }
        Ok(NearestPointTable { n, lists })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn directed(&self, i: usize, j: usize, d: RankParameter) -> f64 {
        rank_select(&self.lists[i * self.n + j], d)
    }

    pub fn hausdorff(&self, i: usize, j: usize, d: RankParameter) -> f64 {
        self.directed(i, j, d).max(self.directed(j, i, d))
    }

    /// Full symmetric bag-distance matrix at rank `d`.
    pub fn matrix(&self, d: RankParameter) -> BagDistances {
        let n = self.n;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let h = self.hausdorff(i, j, d);
                values[i * n + j] = h;
                values[j * n + i] = h;
            }
        }
        BagDistances { n, values }
    }
}

/// Symmetric N×N bag distances over a whole dataset, zero on the diagonal.
///
/// Validation folds index into this matrix instead of recomputing distances.
#[derive(Clone, Debug, PartialEq)]
pub struct BagDistances {
    n: usize,
    values: Vec<f64>,
}

impl BagDistances {
    pub fn compute(data: &Dataset, d: RankParameter, s: &FeatureSubset) -> Result<Self> {
        Ok(NearestPointTable::new(data.bags(), s)?.matrix(d))
    }

    /// Builds from explicit values; used by tests and callers with their own metric.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(MilError::contract(format!("expected {} values, got {}", n * n, values.len())));
        }
        Ok(BagDistances { n, values })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// The `(T+1)×T` matrix of one classification: rows `0..T` are train-train
/// distances, row `T` holds the test bag's distance to each training bag.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    train: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds from rows; `rows` must be `(T+1)` rows of length `T`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let t =
            rows.len().checked_sub(1).filter(|&t| t > 0).ok_or_else(|| MilError::contract("need at least 2 rows"))?;
        if rows.iter().any(|r| r.len() != t) {
            return Err(MilError::contract(format!("every row must have {t} columns")));
        }
        Ok(DistanceMatrix { train: t, values: rows.into_iter().flatten().collect() })
    }

    /// Training bag count `T`.
    pub fn train_len(&self) -> usize {
        self.train
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.train + col]
    }

    /// Distances from the test bag to each training bag.
    pub fn test_row(&self) -> &[f64] {
        &self.values[self.train * self.train..]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.train)
    }
}

/// Distances between every training bag and from `test` to each training bag.
pub fn build_distance_matrix(
    train: &Dataset,
    test: &Bag,
    d: RankParameter,
    s: &FeatureSubset,
) -> Result<DistanceMatrix> {
    if test.dim() != train.dimensionality() {
        return Err(MilError::contract(format!(
            "test bag has {} features, training set has {}",
            test.dim(),
            train.dimensionality()
        )));
    }
    let mut bags = train.bags().to_vec();
    bags.push(test.clone());
    let table = NearestPointTable::new(&bags, s)?;
    let t = train.len();
    let mut values = Vec::with_capacity((t + 1) * t);
    for i in 0..=t {
        for j in 0..t {
            values.push(if i == j { 0.0 } else { table.hausdorff(i, j, d) });
        }
    }
    Ok(DistanceMatrix { train: t, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label;

    fn bag1d(id: &str, xs: &[f64]) -> Bag {
        Bag::from_rows(id, Label::Positive, xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    fn rank(d: usize) -> RankParameter {
        RankParameter::new(d).unwrap()
    }

    #[test]
    fn instance_distance_examples() {
        let all = FeatureSubset::all(2);
        let a = Instance(vec![0.0, 0.0]);
        let b = Instance(vec![3.0, 4.0]);
        assert_eq!(instance_distance(&a, &b, &all).unwrap(), 5.0);
        assert_eq!(instance_distance(&b, &b, &all).unwrap(), 0.0);
        let first = FeatureSubset::new(vec![0], 2).unwrap();
        assert_eq!(instance_distance(&Instance(vec![1.0, 9.0]), &Instance(vec![4.0, 9.0]), &first).unwrap(), 3.0);
    }

    #[test]
    fn directed_examples() {
        let s = FeatureSubset::all(1);
        let a = bag1d("a", &[0.0, 10.0]);
        let b = bag1d("b", &[0.0]);
        assert_eq!(directed_rank_hausdorff(&a, &b, rank(2), &s).unwrap(), 10.0);
        assert_eq!(directed_rank_hausdorff(&a, &b, rank(1), &s).unwrap(), 0.0);
        assert_eq!(directed_rank_hausdorff(&a, &a, rank(2), &s).unwrap(), 0.0);

        let a = bag1d("a", &[0.0, 4.0, 9.0]);
        let b = bag1d("b", &[1.0]);
        assert_eq!(directed_rank_hausdorff(&a, &b, rank(2), &s).unwrap(), 3.0);
        assert_eq!(directed_rank_hausdorff(&a, &b, rank(1), &s).unwrap(), 1.0);
        assert_eq!(directed_rank_hausdorff(&a, &b, rank(3), &s).unwrap(), 8.0);
        // clamped to |a|
        assert_eq!(directed_rank_hausdorff(&a, &b, rank(7), &s).unwrap(), 8.0);
    }

    #[test]
    fn symmetric_examples() {
        let s = FeatureSubset::all(1);
        let a = bag1d("a", &[0.0, 10.0]);
        let b = bag1d("b", &[0.0]);
        assert_eq!(rank_hausdorff(&a, &b, rank(1), &s).unwrap(), 0.0);
        assert_eq!(rank_hausdorff(&a, &b, rank(2), &s).unwrap(), 10.0);
        assert_eq!(rank_hausdorff(&b, &a, rank(2), &s).unwrap(), 10.0);
        assert_eq!(rank_hausdorff(&a, &a, rank(2), &s).unwrap(), 0.0);
    }

    #[test]
    fn matrix_examples() {
        let s = FeatureSubset::all(1);
        let train = Dataset::new(vec![bag1d("t", &[0.0])]).unwrap();
        let m = build_distance_matrix(&train, &bag1d("x", &[3.0]), rank(1), &s).unwrap();
        assert_eq!(m.rows().map(<[f64]>::to_vec).collect::<Vec<_>>(), vec![vec![0.0], vec![3.0]]);

        let train = Dataset::new(vec![bag1d("p", &[1.0, 2.0]), bag1d("q", &[1.0, 2.0])]).unwrap();
        let m = build_distance_matrix(&train, &bag1d("x", &[2.0, 1.0]), rank(1), &s).unwrap();
        assert!(m.rows().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let s = FeatureSubset::all(1);
        let a = bag1d("a", &[0.0]);
        let b = Bag::from_rows("b", Label::Negative, vec![vec![0.0, 1.0]]).unwrap();
        assert!(rank_hausdorff(&a, &b, rank(1), &s).is_err());
        let wide = FeatureSubset::new(vec![1], 2).unwrap();
        assert!(rank_hausdorff(&a, &a, rank(1), &wide).is_err());
        assert!(RankParameter::new(0).is_err());
    }
}
