//! Brute-force reference implementations and random data generators.
#![allow(dead_code)]

use cnnmil::{Bag, Dataset, Label, Objectives};
use rand::Rng;

/// Directed rank distance by the definition: per-point nearest Euclidean
/// distance, sorted ascending, d-th entry (d clamped to |a|).
pub fn directed(a: &[Vec<f64>], b: &[Vec<f64>], d: usize, s: &[usize]) -> f64 {
    let mut nearest: Vec<f64> = a
        .iter()
        .map(|p| {
            b.iter()
                .map(|q| {
                    let mut acc = 0.0;
                    for &k in s {
                        let diff = p[k] - q[k];
                        acc += diff * diff;
                    }
                    acc.sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    nearest.sort_by(|x, y| x.partial_cmp(y).unwrap());
    nearest[d.min(nearest.len()) - 1]
}

pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>], d: usize, s: &[usize]) -> f64 {
    directed(a, b, d, s).max(directed(b, a, d, s))
}

fn rows(bag: &Bag) -> Vec<Vec<f64>> {
    bag.instances().iter().map(|i| i.features().to_vec()).collect()
}

/// Citation-kNN by the definition, returning (label, ref+, ref-, cite+, cite-).
pub fn cnn(
    train: &Dataset,
    test: &Bag,
    eta_r: usize,
    eta_c: usize,
    d: usize,
    theta: f64,
    s: &[usize],
) -> (Label, [usize; 4]) {
    let bags: Vec<Vec<Vec<f64>>> = train.bags().iter().map(rows).collect();
    let t = bags.len();
    let q = rows(test);
    let to_test: Vec<f64> = bags.iter().map(|b| hausdorff(&q, b, d, s)).collect();

    let mut by_distance: Vec<usize> = (0..t).collect();
    by_distance.sort_by(|&x, &y| to_test[x].partial_cmp(&to_test[y]).unwrap().then(x.cmp(&y)));
    let mut counts = [0usize; 4];
    for &j in &by_distance[..eta_r] {
        counts[if train.bags()[j].label().is_positive() { 0 } else { 1 }] += 1;
    }

    // bag i cites the test bag when the test bag is among i's eta_c nearest,
    // ranking it after any training bag at the same distance
    for i in 0..t {
        let mut others: Vec<(f64, usize)> =
            (0..t).filter(|&k| k != i).map(|k| (hausdorff(&bags[k], &bags[i], d, s), 0)).collect();
        others.push((to_test[i], 1));
        others.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
        if others[..eta_c].iter().any(|&(_, is_test)| is_test == 1) {
            counts[if train.bags()[i].label().is_positive() { 2 } else { 3 }] += 1;
        }
    }
    let pos = counts[0] + counts[2];
    let total: usize = counts.iter().sum();
    let label = if total > 0 && pos as f64 / total as f64 >= theta { Label::Positive } else { Label::Negative };
    (label, counts)
}

/// Fronts by repeated extraction of the non-dominated remainder.
pub fn brute_force_fronts(points: &[Objectives]) -> Vec<Vec<usize>> {
    let beats = |a: Objectives, b: Objectives| {
        a.acc_pos >= b.acc_pos && a.acc_neg >= b.acc_neg && (a.acc_pos > b.acc_pos || a.acc_neg > b.acc_neg)
    };
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> =
            left.iter().copied().filter(|&i| !left.iter().any(|&j| beats(points[j], points[i]))).collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

pub fn random_bag(rng: &mut impl Rng, id: String, label: Label, max_len: usize, dim: usize) -> Bag {
    let len = rng.gen_range(1..=max_len);
    let rows = (0..len).map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
    Bag::from_rows(id, label, rows).unwrap()
}

/// Random dataset with `n >= 4` bags, at least two of each class.
pub fn random_dataset(rng: &mut impl Rng, n: usize, max_len: usize, dim: usize) -> Dataset {
    let bags = (0..n)
        .map(|i| {
            let label = match i {
                0 | 1 => Label::Positive,
                2 | 3 => Label::Negative,
                _ if rng.gen_bool(0.5) => Label::Positive,
                _ => Label::Negative,
            };
            random_bag(rng, format!("b{i}"), label, max_len, dim)
        })
        .collect();
    Dataset::new(bags).unwrap()
}

/// Twelve bags on a line: positives contain a point near 0, negatives do not
/// come closer than 5.
pub fn separable_twelve() -> Dataset {
    let mut bags = Vec::new();
    for i in 0..6 {
        let x = i as f64 * 0.1;
        bags.push(
            Bag::from_rows(format!("pos{i}"), Label::Positive, vec![vec![x, 3.0], vec![x + 0.05, -2.0]]).unwrap(),
        );
        bags.push(Bag::from_rows(format!("neg{i}"), Label::Negative, vec![vec![5.0 + x, 1.0 - x]]).unwrap());
    }
    Dataset::new(bags).unwrap()
}
