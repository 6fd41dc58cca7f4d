//! Multinomial logistic regression fit by full-batch gradient descent.
//!
//! Objective: mean softmax cross-entropy plus `l2 / 2 * ||W||^2`. The bias is
//! not penalized, so a heavily regularized model collapses onto the class
//! priors.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// `n_classes x n_features`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl LogisticModel {
    pub fn zeros(n_classes: usize, n_features: usize) -> Self {
        Self {
            weights: vec![vec![0.0; n_features]; n_classes],
            bias: vec![0.0; n_classes],
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Parameters flattened as all weights row by row, then the biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.weights.iter().flatten().chain(&self.bias).copied().collect()
    }

    pub fn from_flat(flat: &[f64], n_classes: usize, n_features: usize) -> Self {
        let weights = flat[..n_classes * n_features]
            .chunks(n_features.max(1))
            .take(n_classes)
            .map(<[f64]>::to_vec)
            .collect();
        Self {
            weights,
            bias: flat[n_classes * n_features..].to_vec(),
        }
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Objective value and its gradient (same shape as the model).
pub fn loss_and_gradient(
    model: &LogisticModel,
    x: &[Vec<f64>],
    y: &[usize],
    l2: f64,
) -> (f64, LogisticModel) {
    let n = x.len() as f64;
    let k = model.bias.len();
    let d = model.weights.first().map_or(0, Vec::len);
    let mut grad = LogisticModel::zeros(k, d);
    let mut loss = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let p = model.probabilities(row);
        loss -= p[label].max(f64::MIN_POSITIVE).ln();
        for c in 0..k {
            let r = p[c] - if c == label { 1.0 } else { 0.0 };
            grad.bias[c] += r / n;
            for (g, v) in grad.weights[c].iter_mut().zip(row) {
                *g += r * v / n;
            }
        }
    }
    loss /= n;
    let mut penalty = 0.0;
    for (gw, w) in grad.weights.iter_mut().zip(&model.weights) {
        for (g, v) in gw.iter_mut().zip(w) {
            *g += l2 * v;
            penalty += v * v;
        }
    }
    (loss + 0.5 * l2 * penalty, grad)
}

pub(crate) struct GdSettings {
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub tol: f64,
}

pub(crate) fn fit(x: &[Vec<f64>], y: &[usize], n_classes: usize, s: &GdSettings) -> LogisticModel {
    let d = x.first().map_or(0, Vec::len);
    let mut model = LogisticModel::zeros(n_classes, d);
    for epoch in 0..s.epochs {
        let (_, grad) = loss_and_gradient(&model, x, y, s.l2);
        let norm = grad.flatten().iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm < s.tol {
            log::debug!("logistic regression converged after {epoch} epochs");
            break;
        }
        for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
            for (a, b) in w.iter_mut().zip(g) {
                *a -= s.learning_rate * b;
            }
        }
        for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
            *b -= s.learning_rate * g;
        }
    }
    model
}
