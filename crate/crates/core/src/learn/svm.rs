//! Soft-margin RBF support vector machine trained with SMO.
//!
//! Each binary problem solves the dual
//!
//! ```text
//! min_a  1/2 a^T Q a - e^T a    s.t.  0 <= a_i <= C,  y^T a = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! by pairwise coordinate steps. The first index of each pair is the maximal
//! KKT violator, the second is chosen by the second-order (largest objective
//! decrease) rule. Iteration stops when the maximal violation gap drops below
//! `tol`. Multiclass prediction is one-vs-one voting.

use serde::{Deserialize, Serialize};

use super::LearnError;

/// Curvature floor for non-positive-definite pairs.
const TAU: f64 = 1e-12;

/// `exp(-gamma * ||x - y||^2)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64, LearnError> {
    if x.len() != y.len() {
        return Err(LearnError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if !(gamma > 0.0) {
        return Err(LearnError::InvalidHyperparameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok(rbf_unchecked(x, y, gamma))
}

#[inline]
pub(crate) fn rbf_unchecked(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// Dense symmetric kernel matrix, row-major.
pub fn kernel_matrix(rows: &[&[f64]], gamma: f64) -> Vec<f64> {
    let n = rows.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf_unchecked(rows[i], rows[j], gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Solution of one binary dual problem.
#[derive(Debug, Clone)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// SMO on a precomputed kernel matrix. `y` holds `+1.0` / `-1.0`.
pub fn solve_binary(kernel: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> BinarySolution {
    let n = y.len();
    let k = |i: usize, j: usize| kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    // gradient of the dual objective: Q a - e
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] >= g_max {
                g_max = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };

        let mut g_min_neg = f64::NEG_INFINITY;
        let mut best_obj = f64::INFINITY;
        let mut j_sel = None;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let score = y[t] * grad[t];
            g_min_neg = g_min_neg.max(score);
            let b = g_max + score;
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
        if g_max + g_min_neg < tol {
            converged = true;
            break;
        }
        let Some(j) = j_sel else {
            converged = true;
            break;
        };
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
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
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
    }

    // offset: average over free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    };

    BinarySolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

/// Largest KKT violation `max(0, 1 - y f)` / `max(0, y f - 1)` / `|y f - 1|`
/// over the training points of a binary solution.
pub fn max_kkt_violation(kernel: &[f64], y: &[f64], sol: &BinarySolution, c: f64) -> f64 {
    let n = y.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let f: f64 = (0..n)
            .map(|j| sol.alpha[j] * y[j] * kernel[i * n + j])
            .sum::<f64>()
            - sol.rho;
        let margin = y[i] * f;
        let a = sol.alpha[i];
        let violation = if a <= 0.0 {
            (1.0 - margin).max(0.0)
        } else if a >= c {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(violation);
    }
    worst
}

/// One binary machine of the one-vs-one ensemble: `positive` vs `negative`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMachine {
    pub positive: usize,
    pub negative: usize,
    /// Indices into [`SvmModel::support_vectors`].
    pub support: Vec<usize>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub rho: f64,
}

impl PairMachine {
    pub fn decision(&self, kernel_row: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.dual_coef)
            .map(|(&s, &a)| a * kernel_row[s])
            .sum::<f64>()
            - self.rho
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub c: f64,
    pub n_classes: usize,
    pub support_vectors: Vec<Vec<f64>>,
    pub machines: Vec<PairMachine>,
}

impl SvmModel {
    /// Decision value of every pair machine, in training order.
    pub fn decision_values(&self, x: &[f64]) -> Vec<f64> {
        let row: Vec<f64> = self
            .support_vectors
            .iter()
            .map(|sv| rbf_unchecked(sv, x, self.gamma))
            .collect();
        self.machines.iter().map(|m| m.decision(&row)).collect()
    }

    /// Vote counts per class (they sum to `k (k - 1) / 2`).
    pub fn votes(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for (m, f) in self.machines.iter().zip(self.decision_values(x)) {
            if f > 0.0 {
                votes[m.positive] += 1.0;
            } else {
                votes[m.negative] += 1.0;
            }
        }
        votes
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SmoSettings {
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_passes: usize,
}

/// Trains all class pairs on already-scaled rows.
pub(crate) fn fit_ovo(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    settings: SmoSettings,
) -> Result<SvmModel, LearnError> {
    use rayon::prelude::*;

    let pairs: Vec<(usize, usize)> = (0..n_classes)
        .flat_map(|a| (a + 1..n_classes).map(move |b| (a, b)))
        .collect();

    let solved: Vec<(usize, usize, Vec<usize>, BinarySolution)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == a || y[i] == b).collect();
            let signs: Vec<f64> = rows.iter().map(|&i| if y[i] == a { 1.0 } else { -1.0 }).collect();
            let refs: Vec<&[f64]> = rows.iter().map(|&i| x[i].as_slice()).collect();
            let kernel = kernel_matrix(&refs, settings.gamma);
            let budget = settings.max_passes.saturating_mul(rows.len().max(1));
            let sol = solve_binary(&kernel, &signs, settings.c, settings.tol, budget);
            if !sol.converged {
                log::warn!(
                    "SMO for classes {a} vs {b} stopped after {} iterations without reaching tol {}",
                    sol.iterations,
                    settings.tol
                );
            }
            (a, b, rows, sol)
        })
        .collect();

    // global support-vector table in order of first use
    let mut slot_of = vec![usize::MAX; y.len()];
    let mut support_vectors = Vec::new();
    let mut machines = Vec::with_capacity(solved.len());
    for (a, b, rows, sol) in solved {
        let mut support = Vec::new();
        let mut dual_coef = Vec::new();
        for (local, &row) in rows.iter().enumerate() {
            let alpha = sol.alpha[local];
            if alpha > 0.0 {
                if slot_of[row] == usize::MAX {
                    slot_of[row] = support_vectors.len();
                    support_vectors.push(x[row].clone());
                }
                support.push(slot_of[row]);
                dual_coef.push(if y[row] == a { alpha } else { -alpha });
            }
        }
        machines.push(PairMachine {
            positive: a,
            negative: b,
            support,
            dual_coef,
            rho: sol.rho,
        });
    }
    Ok(SvmModel {
        gamma: settings.gamma,
        c: settings.c,
        n_classes,
        support_vectors,
        machines,
    })
}

/// `1 / (n_features * var(X))` over every entry of the scaled matrix.
pub fn scale_gamma(x: &[Vec<f64>]) -> f64 {
    let dim = x.first().map_or(0, Vec::len);
    let count = (x.len() * dim) as f64;
    if count == 0.0 {
        return 1.0;
    }
    let mean = x.iter().flatten().sum::<f64>() / count;
    let var = x.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
    if var > 0.0 {
        1.0 / (dim as f64 * var)
    } else {
        1.0
    }
}
