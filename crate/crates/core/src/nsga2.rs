//! A seeded, generic NSGA-II engine.
//!
//! The engine owns selection and variation; problem specifics live behind
//! [`SearchSpace`] and an evaluation callback that receives whole offspring
//! batches (so callers can memoize and evaluate in parallel). All random draws
//! come from one ChaCha stream in a fixed order, so a run is reproducible from
//! its seed regardless of how evaluation is scheduled.

use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MilError, Result};
use crate::pareto::{crowding_distance, fast_nondominated_sort, Objectives};

/// Genetic-search settings shared by both optimization stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-gene mutation probability for scalar genes. Mask bits use `1 / len`.
    pub mutation_prob: f64,
    pub eta_max: usize,
    pub d_max: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 100,
            generations: 100,
            crossover_prob: 0.9,
            mutation_prob: 0.1,
            eta_max: 15,
            d_max: 5,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 || !self.population.is_multiple_of(2) {
            return Err(MilError::config(format!("population must be even and at least 4, got {}", self.population)));
        }
        if self.generations == 0 {
            return Err(MilError::config("generations must be at least 1"));
        }
        for (name, p) in [("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(MilError::config(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.eta_max == 0 || self.d_max == 0 {
            return Err(MilError::config("eta_max and d_max must be at least 1"));
        }
        Ok(())
    }
}

/// Genome representation and variation operators of one problem.
pub trait SearchSpace: Sync {
    type Genome: Clone + Eq + Hash + Send + Sync;

    fn sample(&self, rng: &mut ChaCha8Rng) -> Self::Genome;
    fn crossover(&self, a: &Self::Genome, b: &Self::Genome, rng: &mut ChaCha8Rng) -> (Self::Genome, Self::Genome);
    fn mutate(&self, genome: &mut Self::Genome, rng: &mut ChaCha8Rng);
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual<G> {
    pub genome: G,
    pub objectives: Objectives,
    /// Front index; 0 is the non-dominated front.
    pub rank: usize,
    pub crowding: f64,
}

/// Best single-objective values in the population after a generation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_acc_pos: f64,
    pub best_acc_neg: f64,
    pub front_size: usize,
}

#[derive(Clone, Debug)]
pub struct Evolution<G> {
    pub population: Vec<Individual<G>>,
    /// Entry 0 describes the initial population.
    pub history: Vec<GenerationStats>,
}

impl<G: Clone + Eq + Hash> Evolution<G> {
    /// Rank-0 members with repeated genomes removed, in population order.
    pub fn first_front(&self) -> Vec<Individual<G>> {
        let mut seen = std::collections::HashSet::new();
        self.population.iter().filter(|ind| ind.rank == 0 && seen.insert(ind.genome.clone())).cloned().collect()
    }
}

fn crowded_better<G>(a: &Individual<G>, b: &Individual<G>) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding)
}

fn tournament<'a, G>(pop: &'a [Individual<G>], rng: &mut ChaCha8Rng) -> &'a Individual<G> {
    let a = &pop[rng.gen_range(0..pop.len())];
    let b = &pop[rng.gen_range(0..pop.len())];
    if crowded_better(b, a) {
        b
    } else {
        a
    }
}

/// Keeps the best `keep` individuals by front, then by crowding distance.
fn environmental_selection<G: Clone>(mut pool: Vec<(G, Objectives)>, keep: usize) -> Vec<Individual<G>> {
    let objectives: Vec<Objectives> = pool.iter().map(|(_, o)| *o).collect();
    let fronts = fast_nondominated_sort(&objectives);
    let mut slots: Vec<Option<(G, Objectives)>> = pool.drain(..).map(Some).collect();
    let mut next = Vec::with_capacity(keep);
    for (rank, front) in fronts.iter().enumerate() {
        if next.len() >= keep {
            break;
        }
        let members: Vec<Objectives> = front.iter().map(|&i| objectives[i]).collect();
        let crowding = crowding_distance(&members);
        let mut order: Vec<usize> = (0..front.len()).collect();
        if next.len() + front.len() > keep {
            order.sort_by(|&a, &b| crowding[b].total_cmp(&crowding[a]).then(a.cmp(&b)));
            order.truncate(keep - next.len());
        }
        for k in order {
            let (genome, objectives) = slots[front[k]].take().expect("each index selected once");
            next.push(Individual { genome, objectives, rank, crowding: crowding[k] });
        }
    }
    next
}

fn stats<G>(generation: usize, pop: &[Individual<G>]) -> GenerationStats {
    GenerationStats {
        generation,
        best_acc_pos: pop.iter().map(|i| i.objectives.acc_pos).fold(f64::NEG_INFINITY, f64::max),
        best_acc_neg: pop.iter().map(|i| i.objectives.acc_neg).fold(f64::NEG_INFINITY, f64::max),
        front_size: pop.iter().filter(|i| i.rank == 0).count(),
    }
}

/// Runs NSGA-II: binary crowded tournaments, crossover and mutation, then
/// elitist selection from parents plus offspring.
pub fn run_nsga2<S, E>(space: &S, config: &GaConfig, seed: u64, mut evaluate: E) -> Result<Evolution<S::Genome>>
where
    S: SearchSpace,
    E: FnMut(&[S::Genome]) -> Result<Vec<Objectives>>,
{
    config.validate()?;
    let n = config.population;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut eval_batch = |genomes: Vec<S::Genome>| -> Result<Vec<(S::Genome, Objectives)>> {
        let objectives = evaluate(&genomes)?;
        if objectives.len() != genomes.len() {
            return Err(MilError::contract("evaluator returned the wrong number of objective pairs"));
        }
        Ok(genomes.into_iter().zip(objectives).collect())
    };

    let initial: Vec<S::Genome> = (0..n).map(|_| space.sample(&mut rng)).collect();
    let mut population = environmental_selection(eval_batch(initial)?, n);
    let mut history = vec![stats(0, &population)];

    for generation in 1..=config.generations {
        let mut offspring = Vec::with_capacity(n);
        while offspring.len() < n {
            let a = tournament(&population, &mut rng).genome.clone();
            let b = tournament(&population, &mut rng).genome.clone();
            let (mut c1, mut c2) =
                if rng.gen::<f64>() < config.crossover_prob { space.crossover(&a, &b, &mut rng) } else { (a, b) };
            space.mutate(&mut c1, &mut rng);
            space.mutate(&mut c2, &mut rng);
            offspring.push(c1);
            offspring.push(c2);
        }

        let mut pool: Vec<(S::Genome, Objectives)> =
            population.into_iter().map(|ind| (ind.genome, ind.objectives)).collect();
        pool.extend(eval_batch(offspring)?);
        population = environmental_selection(pool, n);
        history.push(stats(generation, &population));
    }

    Ok(Evolution { population, history })
}

/// Simulated binary crossover of two reals, clamped to `[lo, hi]`.
pub(crate) fn sbx(x1: f64, x2: f64, lo: f64, hi: f64, distribution_index: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u: f64 = rng.gen();
    let exponent = 1.0 / (distribution_index + 1.0);
    let beta = if u <= 0.5 { (2.0 * u).powf(exponent) } else { (1.0 / (2.0 * (1.0 - u))).powf(exponent) };
    let c1 = 0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2);
    let c2 = 0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2);
    (c1.clamp(lo, hi), c2.clamp(lo, hi))
}

/// Uniform crossover of two bit masks.
pub(crate) fn uniform_mask_crossover(a: &[bool], b: &[bool], rng: &mut ChaCha8Rng) -> (Vec<bool>, Vec<bool>) {
    let mut c1 = a.to_vec();
    let mut c2 = b.to_vec();
    for k in 0..c1.len() {
        if rng.gen::<bool>() {
            std::mem::swap(&mut c1[k], &mut c2[k]);
        }
    }
    (c1, c2)
}

/// Flips each bit with probability `1 / len`, then ensures at least one bit is set.
pub(crate) fn mutate_mask(mask: &mut [bool], rng: &mut ChaCha8Rng) {
    let p = 1.0 / mask.len() as f64;
    for bit in mask.iter_mut() {
        if rng.gen::<f64>() < p {
            *bit = !*bit;
        }
    }
    repair_mask(mask, rng);
}

pub(crate) fn repair_mask(mask: &mut [bool], rng: &mut ChaCha8Rng) {
    if !mask.iter().any(|&b| b) {
        let k = rng.gen_range(0..mask.len());
        mask[k] = true;
    }
}
