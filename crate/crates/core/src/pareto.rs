//! Pareto dominance, non-dominated sorting, crowding distance and the 2-D
//! hypervolume indicator. All objectives are maximized.

use serde::{Deserialize, Serialize};

/// A pair of maximized objectives: positive-class and negative-class accuracy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    pub acc_pos: f64,
    pub acc_neg: f64,
}

impl Objectives {
    pub fn new(acc_pos: f64, acc_neg: f64) -> Self {
        Objectives { acc_pos, acc_neg }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.acc_pos, self.acc_neg]
    }

    pub fn min(&self) -> f64 {
        self.acc_pos.min(self.acc_neg)
    }
}

impl From<(f64, f64)> for Objectives {
    fn from((acc_pos, acc_neg): (f64, f64)) -> Self {
        Objectives { acc_pos, acc_neg }
    }
}

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: Objectives, b: Objectives) -> bool {
    let (a, b) = (a.as_array(), b.as_array());
    a.iter().zip(&b).all(|(x, y)| x >= y) && a.iter().zip(&b).any(|(x, y)| x > y)
}

/// Fast non-dominated sort. Returns fronts of indices into `points`; the
/// first front is non-dominated, each later front is dominated only by
/// members of earlier ones. Indices within a front are ascending.
pub fn fast_nondominated_sort(points: &[Objectives]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for p in 0..n {
        for q in p + 1..n {
            if dominates(points[p], points[q]) {
                dominated_by_me[p].push(q);
                domination_count[q] += 1;
            } else if dominates(points[q], points[p]) {
                dominated_by_me[q].push(p);
                domination_count[p] += 1;
            }
        }
    }

    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by_me[p] {
                domination_count[q] -= 1;
                if domination_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of every member of one front.
///
/// Per objective, the extreme members get `+inf` and interior members add the
/// gap between their neighbours normalized by the objective's range.
pub fn crowding_distance(front: &[Objectives]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let mut distance = vec![0.0; n];
    for m in 0..2 {
        let value = |i: usize| front[i].as_array()[m];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let (lo, hi) = (value(order[0]), value(order[n - 1]));
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range > 0.0 {
            for w in order.windows(3) {
                distance[w[1]] += (value(w[2]) - value(w[0])) / range;
            }
        }
    }
    distance
}

/// Area dominated by `points` relative to `reference` (both objectives maximized).
pub fn hypervolume(points: &[Objectives], reference: Objectives) -> f64 {
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.acc_pos > reference.acc_pos && p.acc_neg > reference.acc_neg)
        .map(|p| (p.acc_pos - reference.acc_pos, p.acc_neg - reference.acc_neg))
        .collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    let mut area = 0.0;
    let mut covered = 0.0;
    for (x, y) in pts {
        if y > covered {
            area += x * (y - covered);
            covered = y;
        }
    }
    area
}
