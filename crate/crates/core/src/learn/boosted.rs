//! Multiclass gradient boosting with least-squares regression trees.
//!
//! Scores start at the log class priors. Each round fits one depth-limited
//! tree per class to the softmax pseudo-residuals `onehot(y) - p` and adds
//! `learning_rate` times its output to that class's score.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::logistic::softmax;
use super::tree::{DecisionTree, GrowParams, Targets, TreeBuilder};

/// Floor applied to class priors before taking logs.
const PRIOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub initial_scores: Vec<f64>,
    pub learning_rate: f64,
    /// `rounds[r][c]` is the tree for class `c` in round `r`.
    pub rounds: Vec<Vec<DecisionTree>>,
}

impl BoostedModel {
    pub fn raw_scores(&self, x: &[f64]) -> Vec<f64> {
        let mut scores = self.initial_scores.clone();
        for round in &self.rounds {
            for (s, tree) in scores.iter_mut().zip(round) {
                *s += self.learning_rate * tree.leaf_value(x)[0];
            }
        }
        scores
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.raw_scores(x))
    }
}

pub(crate) struct BoostSettings {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub tree_depth: usize,
    pub min_leaf: usize,
}

/// Mean softmax cross-entropy of `scores` against `y`.
pub fn log_loss(scores: &[Vec<f64>], y: &[usize]) -> f64 {
    let n = y.len() as f64;
    scores
        .iter()
        .zip(y)
        .map(|(s, &label)| -softmax(s)[label].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / n
}

/// Returns the model and the training log-loss after initialization and after
/// every round (`n_rounds + 1` entries).
pub(crate) fn fit(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    s: &BoostSettings,
    seed: u64,
) -> (BoostedModel, Vec<f64>) {
    let n = y.len();
    let mut counts = vec![0.0; n_classes];
    for &l in y {
        counts[l] += 1.0;
    }
    let initial_scores: Vec<f64> = counts
        .iter()
        .map(|c| (c / n as f64).max(PRIOR_FLOOR).ln())
        .collect();
    let mut scores = vec![initial_scores.clone(); n];
    let mut trace = vec![log_loss(&scores, y)];
    // trees use every feature, so the generator is never consulted; kept for a uniform builder
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grow = GrowParams {
        max_depth: Some(s.tree_depth),
        min_leaf: s.min_leaf,
        features_per_split: None,
    };

    let mut rounds = Vec::with_capacity(s.n_rounds);
    for _ in 0..s.n_rounds {
        let probs: Vec<Vec<f64>> = scores.iter().map(|r| softmax(r)).collect();
        let mut round = Vec::with_capacity(n_classes);
        for class in 0..n_classes {
            let residuals: Vec<f64> = probs
                .iter()
                .zip(y)
                .map(|(p, &label)| f64::from(u8::from(label == class)) - p[class])
                .collect();
            let tree = TreeBuilder::new(x, Targets::Values(&residuals), grow, &mut rng)
                .grow((0..n).collect());
            round.push(tree);
        }
        for (row, score) in x.iter().zip(scores.iter_mut()) {
            for (s_c, tree) in score.iter_mut().zip(&round) {
                *s_c += s.learning_rate * tree.leaf_value(row)[0];
            }
        }
        rounds.push(round);
        trace.push(log_loss(&scores, y));
    }
    (
        BoostedModel {
            initial_scores,
            learning_rate: s.learning_rate,
            rounds,
        },
        trace,
    )
}
