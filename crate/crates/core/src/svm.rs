//! Soft-margin kernel classifier with a radial-basis kernel, trained by
//! sequential minimal optimization with second-order working-set selection.
//!
//! Dual problem: minimize `½ aᵀQa − Σa` subject to `yᵀa = 0`, `0 ≤ a ≤ c`,
//! where `Q_ij = y_i y_j K(x_i, x_j)`.

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{MilError, Result};

pub const SOLVER_TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

pub fn rbf(gamma: f64, u: &[f64], v: &[f64]) -> f64 {
    let sq: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * sq).exp()
}

/// Row-major Gram matrix of `rows` under the RBF kernel.
pub fn rbf_gram(rows: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = rows.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        gram[i * n + i] = 1.0;
        for j in i + 1..n {
            let k = rbf(gamma, &rows[i], &rows[j]);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }
    gram
}

/// Solution of the dual problem.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    pub alphas: Vec<f64>,
    /// Decision offset: `f(x) = Σ a_i y_i K(x_i, x) + bias`.
    pub bias: f64,
    pub iterations: usize,
}

/// Solves the dual for a precomputed `n×n` Gram matrix.
pub fn solve_dual(gram: &[f64], labels: &[Label], c: f64) -> Result<DualSolution> {
    let n = labels.len();
    if gram.len() != n * n {
        return Err(MilError::contract(format!("Gram matrix has {} entries for {n} rows", gram.len())));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(MilError::contract(format!("c = {c} must be positive")));
    }
    let n_pos = labels.iter().filter(|l| l.is_positive()).count();
    if n_pos == 0 || n_pos == n {
        return Err(MilError::contract("kernel classifier needs both classes"));
    }

    let y: Vec<f64> = labels.iter().map(|l| l.as_f64()).collect();
    let k = |i: usize, j: usize| gram[i * n + j];
    let q = |i: usize, j: usize| y[i] * y[j] * k(i, j);

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = 100_000.max(100 * n);
    let mut iterations = 0;

    let up = |a: f64, yi: f64| if yi > 0.0 { a < c } else { a > 0.0 };
    let low = |a: f64, yi: f64| if yi > 0.0 { a > 0.0 } else { a < c };

    while iterations < max_iter {
        // working set: i maximizes -y G over I_up, j by second-order gain over I_low
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else { break };

        let mut gmin = f64::INFINITY;
        let mut best_obj = f64::INFINITY;
        let mut j_sel = None;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let mut a = k(i, i) + k(t, t) - 2.0 * k(i, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj <= best_obj {
                    best_obj = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax - gmin < SOLVER_TOLERANCE {
            break;
        }
        let Some(j) = j_sel else { break };
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }

    // offset from free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { (ub + lb) / 2.0 };
    Ok(DualSolution { alphas: alpha, bias: -rho, iterations })
}

/// Trained second-level classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSvm {
    pub gamma: f64,
    pub c: f64,
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub support_rows: Vec<Vec<f64>>,
    pub support_labels: Vec<Label>,
}

impl KernelSvm {
    pub fn train(rows: &[Vec<f64>], labels: &[Label], gamma: f64, c: f64) -> Result<Self> {
        if rows.len() != labels.len() || rows.is_empty() {
            return Err(MilError::contract(format!("{} rows for {} labels", rows.len(), labels.len())));
        }
        let width = rows[0].len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(MilError::contract("rows differ in width"));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(MilError::contract(format!("gamma = {gamma} must be positive")));
        }
        let sol = solve_dual(&rbf_gram(rows, gamma), labels, c)?;
        Ok(KernelSvm {
            gamma,
            c,
            alphas: sol.alphas,
            bias: sol.bias,
            support_rows: rows.to_vec(),
            support_labels: labels.to_vec(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.support_rows.first().map_or(0, Vec::len)
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.alphas
            .iter()
            .zip(&self.support_rows)
            .zip(&self.support_labels)
            .filter(|((a, _), _)| **a > 0.0)
            .map(|((a, row), l)| a * l.as_f64() * rbf(self.gamma, row, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        label_of(self.decision(x))
    }
}

pub(crate) fn label_of(decision: f64) -> Label {
    if decision >= 0.0 {
        Label::Positive
    } else {
        Label::Negative
    }
}
