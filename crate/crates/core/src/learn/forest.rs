//! Random forest: bootstrap-resampled CART trees with per-split feature
//! subsampling, combined by majority vote.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, GrowParams, Targets, TreeBuilder};
use super::argmax;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_classes: usize,
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    /// Fraction of trees voting for each class.
    pub fn vote_shares(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.n_classes];
        for tree in &self.trees {
            votes[argmax(tree.leaf_value(x))] += 1.0;
        }
        let n = self.trees.len().max(1) as f64;
        votes.iter_mut().for_each(|v| *v /= n);
        votes
    }
}

pub(crate) struct ForestSettings {
    pub n_trees: usize,
    pub grow: GrowParams,
    pub bootstrap: bool,
}

/// Tree `t` draws from ChaCha8 stream `t` of the master seed, so every tree is
/// reproducible independently of scheduling.
pub(crate) fn fit(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    s: &ForestSettings,
    seed: u64,
) -> ForestModel {
    let n = y.len();
    let trees = (0..s.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let rows: Vec<usize> = if s.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            TreeBuilder::new(x, Targets::Classes { labels: y, n_classes }, s.grow, &mut rng).grow(rows)
        })
        .collect();
    ForestModel { n_classes, trees }
}
