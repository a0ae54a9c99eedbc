//! Multi-objective search over CNN parameters and feature subsets.
//!
//! Each genome decodes to a [`CnnParams`]; its objectives are the validated
//! positive- and negative-class accuracies on the training set.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnn::CnnParams;
use crate::data::{Dataset, FeatureSubset};
use crate::error::{MilError, Result};
use crate::hausdorff::{NearestPointTable, RankParameter};
use crate::nsga2::{
    mutate_mask, repair_mask, run_nsga2, sbx, uniform_mask_crossover, Evolution, GaConfig, SearchSpace,
};
use crate::pareto::Objectives;
use crate::validation::{fold_plan, validate_with_distances, Scheme, ValidationReport};

pub const THETA_MIN: f64 = 0.05;
pub const THETA_MAX: f64 = 0.95;
const SBX_INDEX: f64 = 15.0;
const THETA_STEP: f64 = 0.1;

/// Encoded CNN parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CnnGenome {
    pub eta_r: usize,
    pub eta_c: usize,
    pub d: usize,
    pub theta: f64,
    pub mask: Vec<bool>,
}

impl PartialEq for CnnGenome {
    fn eq(&self, other: &Self) -> bool {
        self.eta_r == other.eta_r
            && self.eta_c == other.eta_c
            && self.d == other.d
            && self.theta.to_bits() == other.theta.to_bits()
            && self.mask == other.mask
    }
}

impl Eq for CnnGenome {}

impl Hash for CnnGenome {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.eta_r.hash(state);
        self.eta_c.hash(state);
        self.d.hash(state);
        self.theta.to_bits().hash(state);
        self.mask.hash(state);
    }
}

impl CnnGenome {
    /// Decodes into parameters, clamping neighbourhood sizes to `max_eta`.
    pub fn to_params(&self, max_eta: usize) -> Result<CnnParams> {
        if max_eta == 0 {
            return Err(MilError::contract("no room for a neighbourhood: max_eta = 0"));
        }
        Ok(CnnParams {
            eta_r: self.eta_r.clamp(1, max_eta),
            eta_c: self.eta_c.clamp(1, max_eta),
            d: RankParameter::new(self.d)?,
            theta: self.theta,
            features: FeatureSubset::from_mask(&self.mask)?,
        })
    }

    pub fn from_params(params: &CnnParams, dimensionality: usize) -> Self {
        CnnGenome {
            eta_r: params.eta_r,
            eta_c: params.eta_c,
            d: params.d.get(),
            theta: params.theta,
            mask: params.features.to_mask(dimensionality),
        }
    }
}

/// Variation operators for [`CnnGenome`].
#[derive(Clone, Debug)]
pub struct CnnSpace {
    pub dimensionality: usize,
    pub eta_max: usize,
    pub d_max: usize,
    pub mutation_prob: f64,
}

impl CnnSpace {
    /// `eta_max` is capped at the largest neighbourhood the validation folds allow.
    pub fn new(config: &GaConfig, dimensionality: usize, max_eta: usize) -> Self {
        CnnSpace {
            dimensionality,
            eta_max: config.eta_max.min(max_eta).max(1),
            d_max: config.d_max,
            mutation_prob: config.mutation_prob,
        }
    }
}

impl SearchSpace for CnnSpace {
    type Genome = CnnGenome;

    fn sample(&self, rng: &mut ChaCha8Rng) -> CnnGenome {
        let mut mask: Vec<bool> = (0..self.dimensionality).map(|_| rng.gen()).collect();
        repair_mask(&mut mask, rng);
        CnnGenome {
            eta_r: rng.gen_range(1..=self.eta_max),
            eta_c: rng.gen_range(1..=self.eta_max),
            d: rng.gen_range(1..=self.d_max),
            theta: rng.gen_range(THETA_MIN..=THETA_MAX),
            mask,
        }
    }

    fn crossover(&self, a: &CnnGenome, b: &CnnGenome, rng: &mut ChaCha8Rng) -> (CnnGenome, CnnGenome) {
        // single cut point over (eta_r, eta_c, d)
        let ints_a = [a.eta_r, a.eta_c, a.d];
        let ints_b = [b.eta_r, b.eta_c, b.d];
        let cut = rng.gen_range(1..3);
        let mut x = ints_a;
        let mut y = ints_b;
        x[cut..].copy_from_slice(&ints_b[cut..]);
        y[cut..].copy_from_slice(&ints_a[cut..]);

        let (t1, t2) = sbx(a.theta, b.theta, THETA_MIN, THETA_MAX, SBX_INDEX, rng);
        let (mut m1, mut m2) = uniform_mask_crossover(&a.mask, &b.mask, rng);
        repair_mask(&mut m1, rng);
        repair_mask(&mut m2, rng);
        (
            CnnGenome { eta_r: x[0], eta_c: x[1], d: x[2], theta: t1, mask: m1 },
            CnnGenome { eta_r: y[0], eta_c: y[1], d: y[2], theta: t2, mask: m2 },
        )
    }

    fn mutate(&self, g: &mut CnnGenome, rng: &mut ChaCha8Rng) {
        if rng.gen::<f64>() < self.mutation_prob {
            g.eta_r = rng.gen_range(1..=self.eta_max);
        }
        if rng.gen::<f64>() < self.mutation_prob {
            g.eta_c = rng.gen_range(1..=self.eta_max);
        }
        if rng.gen::<f64>() < self.mutation_prob {
            g.d = rng.gen_range(1..=self.d_max);
        }
        if rng.gen::<f64>() < self.mutation_prob {
            g.theta = (g.theta + rng.gen_range(-THETA_STEP..=THETA_STEP)).clamp(THETA_MIN, THETA_MAX);
        }
        mutate_mask(&mut g.mask, rng);
    }
}

/// Objective values keyed by genome, shared across threads.
#[derive(Debug, Default)]
pub struct FitnessMemo {
    map: Mutex<HashMap<CnnGenome, Objectives>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl FitnessMemo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, genome: &CnnGenome) -> Option<Objectives> {
        let found = self.map.lock().expect("memo lock").get(genome).copied();
        match found {
            Some(_) => self.hits.fetch_add(1, Ordering::Relaxed),
            None => self.misses.fetch_add(1, Ordering::Relaxed),
        };
        found
    }

    pub fn insert(&self, genome: CnnGenome, objectives: Objectives) {
        self.map.lock().expect("memo lock").insert(genome, objectives);
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("memo lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }
}

/// Largest neighbourhood size every training portion of `scheme` supports.
pub fn max_eta_for(train: &Dataset, scheme: Scheme) -> Result<usize> {
    let folds = fold_plan(&train.labels(), scheme)?;
    let largest_fold = folds.iter().map(Vec::len).max().unwrap_or(1);
    let smallest_train = train.len().saturating_sub(largest_fold);
    smallest_train
        .checked_sub(1)
        .filter(|&e| e > 0)
        .ok_or_else(|| MilError::contract(format!("{} bags are too few for {scheme:?}", train.len())))
}

/// Validation of CNN genomes on one training set.
pub struct GenomeEvaluator<'a> {
    train: &'a Dataset,
    scheme: Scheme,
    max_eta: usize,
    memo: &'a FitnessMemo,
}

impl<'a> GenomeEvaluator<'a> {
    pub fn new(train: &'a Dataset, scheme: Scheme, memo: &'a FitnessMemo) -> Result<Self> {
        train.require_both_classes()?;
        let max_eta = max_eta_for(train, scheme)?;
        Ok(GenomeEvaluator { train, scheme, max_eta, memo })
    }

    pub fn max_eta(&self) -> usize {
        self.max_eta
    }

    pub fn decode(&self, genome: &CnnGenome) -> Result<CnnParams> {
        genome.to_params(self.max_eta)
    }

    /// Full validation report for one genome, bypassing the memo.
    pub fn report(&self, genome: &CnnGenome) -> Result<ValidationReport> {
        let params = self.decode(genome)?;
        let table = NearestPointTable::new(self.train.bags(), &params.features)?;
        self.report_with_table(&table, &params)
    }

    fn report_with_table(&self, table: &NearestPointTable, params: &CnnParams) -> Result<ValidationReport> {
        let distances = table.matrix(params.d);
        validate_with_distances(&distances, &self.train.labels(), self.train.dimensionality(), params, self.scheme)
    }

    pub fn evaluate(&self, genome: &CnnGenome) -> Result<Objectives> {
        if let Some(hit) = self.memo.get(genome) {
            return Ok(hit);
        }
        let objectives = Objectives::from(self.report(genome)?.objectives());
        self.memo.insert(genome.clone(), objectives);
        Ok(objectives)
    }

    /// Evaluates a batch, computing each distinct uncached genome once. Genomes
    /// sharing a feature mask share one nearest-point table.
    pub fn evaluate_batch(&self, genomes: &[CnnGenome]) -> Result<Vec<Objectives>> {
        let mut pending: Vec<&CnnGenome> = Vec::new();
        let mut queued = std::collections::HashSet::new();
        for g in genomes {
            if self.memo.get(g).is_none() && queued.insert(g) {
                pending.push(g);
            }
        }

        let mut by_mask: Vec<(&[bool], Vec<&CnnGenome>)> = Vec::new();
        let mut mask_slot: HashMap<&[bool], usize> = HashMap::new();
        for g in pending {
            let slot = *mask_slot.entry(&g.mask).or_insert_with(|| {
                by_mask.push((&g.mask, Vec::new()));
                by_mask.len() - 1
            });
            by_mask[slot].1.push(g);
        }

        let results: Vec<Vec<(CnnGenome, Objectives)>> = by_mask
            .par_iter()
            .map(|(mask, group)| {
                let features = FeatureSubset::from_mask(mask)?;
                let table = NearestPointTable::new(self.train.bags(), &features)?;
                group
                    .iter()
                    .map(|g| {
                        let params = self.decode(g)?;
                        let report = self.report_with_table(&table, &params)?;
                        Ok(((*g).clone(), Objectives::from(report.objectives())))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        for (g, o) in results.into_iter().flatten() {
            self.memo.insert(g, o);
        }

        genomes
            .iter()
            .map(|g| {
                self.memo
                    .map
                    .lock()
                    .expect("memo lock")
                    .get(g)
                    .copied()
                    .ok_or_else(|| MilError::contract("genome missing from memo"))
            })
            .collect()
    }
}

/// Leave-one-out objectives of one genome, memoized.
pub fn evaluate_genome(train: &Dataset, genome: &CnnGenome, memo: &FitnessMemo) -> Result<Objectives> {
    GenomeEvaluator::new(train, Scheme::Loo, memo)?.evaluate(genome)
}

/// One CNN classifier on the Pareto front.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    pub params: CnnParams,
    pub acc_pos: f64,
    pub acc_neg: f64,
}

impl FrontMember {
    pub fn objectives(&self) -> Objectives {
        Objectives::new(self.acc_pos, self.acc_neg)
    }
}

/// Mutually non-dominated CNN classifiers.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParetoFront {
    pub members: Vec<FrontMember>,
}

impl ParetoFront {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn objectives(&self) -> Vec<Objectives> {
        self.members.iter().map(FrontMember::objectives).collect()
    }
}

/// Outcome of a CNN parameter search.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub front: ParetoFront,
    pub evolution: Evolution<CnnGenome>,
    pub evaluations: usize,
}

/// NSGA-II search with leave-one-out objectives.
pub fn evolve(train: &Dataset, config: &GaConfig, seed: u64) -> Result<ParetoFront> {
    Ok(evolve_with(train, config, seed, Scheme::Loo)?.front)
}

/// NSGA-II search with objectives estimated by `scheme`.
pub fn evolve_with(train: &Dataset, config: &GaConfig, seed: u64, scheme: Scheme) -> Result<SearchOutcome> {
    config.validate()?;
    let memo = FitnessMemo::new();
    let evaluator = GenomeEvaluator::new(train, scheme, &memo)?;
    let space = CnnSpace::new(config, train.dimensionality(), evaluator.max_eta());
    let evolution = run_nsga2(&space, config, seed, |batch| evaluator.evaluate_batch(batch))?;

    let mut members = evolution
        .first_front()
        .into_iter()
        .map(|ind| {
            Ok(FrontMember {
                params: evaluator.decode(&ind.genome)?,
                acc_pos: ind.objectives.acc_pos,
                acc_neg: ind.objectives.acc_neg,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    members.sort_by(|a, b| b.acc_neg.total_cmp(&a.acc_neg).then(a.acc_pos.total_cmp(&b.acc_pos)));
    Ok(SearchOutcome { front: ParetoFront { members }, evolution, evaluations: memo.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Bag, Label};
    use rand::SeedableRng;

    fn toy() -> Dataset {
        let bag = |id: &str, l: Label, rows: Vec<Vec<f64>>| Bag::from_rows(id, l, rows).unwrap();
        Dataset::new(vec![
            bag("p1", Label::Positive, vec![vec![0.0, 5.0], vec![0.2, 9.0]]),
            bag("p2", Label::Positive, vec![vec![0.1, 1.0]]),
            bag("n1", Label::Negative, vec![vec![10.0, 4.0]]),
            bag("n2", Label::Negative, vec![vec![10.3, 0.0], vec![10.1, 7.0]]),
        ])
        .unwrap()
    }

    fn genome(theta: f64, mask: Vec<bool>) -> CnnGenome {
        CnnGenome { eta_r: 1, eta_c: 1, d: 1, theta, mask }
    }

    #[test]
    fn memo_serves_repeats() {
        let d = toy();
        let memo = FitnessMemo::new();
        let g = genome(0.5, vec![true, false]);
        let first = evaluate_genome(&d, &g, &memo).unwrap();
        let second = evaluate_genome(&d, &g, &memo).unwrap();
        assert_eq!(first.acc_pos.to_bits(), second.acc_pos.to_bits());
        assert_eq!(first.acc_neg.to_bits(), second.acc_neg.to_bits());
        assert_eq!(memo.len(), 1);
        assert_eq!(memo.hits(), 1);
        assert_eq!(first, Objectives::new(1.0, 1.0));
    }

    #[test]
    fn low_threshold_genome_is_a_constant_classifier() {
        let d = toy();
        let memo = FitnessMemo::new();
        // eta_r = 2 always includes a positive reference, so every score exceeds 0.05
        let g = CnnGenome { eta_r: 2, eta_c: 1, d: 1, theta: 0.05, mask: vec![true, false] };
        assert_eq!(evaluate_genome(&d, &g, &memo).unwrap(), Objectives::new(1.0, 0.0));
    }

    #[test]
    fn batch_matches_single_evaluation() {
        let d = toy();
        let space = CnnSpace { dimensionality: 2, eta_max: 2, d_max: 2, mutation_prob: 0.1 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let genomes: Vec<CnnGenome> = (0..12).map(|_| space.sample(&mut rng)).collect();
        let batch_memo = FitnessMemo::new();
        let batch = GenomeEvaluator::new(&d, Scheme::Loo, &batch_memo).unwrap().evaluate_batch(&genomes).unwrap();
        for (g, o) in genomes.iter().zip(batch) {
            assert_eq!(evaluate_genome(&d, g, &FitnessMemo::new()).unwrap(), o);
        }
    }

    #[test]
    fn decode_encode_roundtrip() {
        let g = CnnGenome { eta_r: 3, eta_c: 2, d: 4, theta: 0.37, mask: vec![false, true, true] };
        let p = g.to_params(5).unwrap();
        assert_eq!(CnnGenome::from_params(&p, 3), g);
        // clamped on decode
        assert_eq!(g.to_params(2).unwrap().eta_r, 2);
    }

    #[test]
    fn max_eta_follows_the_scheme() {
        let d = toy();
        assert_eq!(max_eta_for(&d, Scheme::Loo).unwrap(), 2);
        assert_eq!(max_eta_for(&d, Scheme::KFold { k: 2, seed: 0 }).unwrap(), 1);
    }

    #[test]
    fn variation_keeps_genomes_valid() {
        let space = CnnSpace { dimensionality: 5, eta_max: 4, d_max: 3, mutation_prob: 0.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = space.sample(&mut rng);
            let b = space.sample(&mut rng);
            let (mut c, mut e) = space.crossover(&a, &b, &mut rng);
            space.mutate(&mut c, &mut rng);
            space.mutate(&mut e, &mut rng);
            for g in [a, b, c, e] {
                assert!((1..=4).contains(&g.eta_r) && (1..=4).contains(&g.eta_c));
                assert!((1..=3).contains(&g.d));
                assert!((THETA_MIN..=THETA_MAX).contains(&g.theta));
                assert!(g.mask.iter().any(|&x| x));
            }
        }
    }
}
