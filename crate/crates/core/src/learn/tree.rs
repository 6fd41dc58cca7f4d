//! CART trees: Gini classification trees and least-squares regression trees.
//!
//! Both share one greedy builder. Candidate thresholds are midpoints between
//! consecutive distinct values of a feature; a split is accepted only when it
//! strictly lowers the impurity.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Splits whose impurity decrease is at or below this are rejected.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class probabilities for classification trees, a single value for
    /// regression trees.
    Leaf { value: Vec<f64> },
}

/// Node arena; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn leaf_value(&self, x: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                TreeNode::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split; `None` means all.
    pub features_per_split: Option<usize>,
}

pub(crate) enum Targets<'a> {
    Classes { labels: &'a [usize], n_classes: usize },
    Values(&'a [f64]),
}

/// Running sufficient statistics for one side of a split.
#[derive(Clone)]
enum Stats {
    Counts { counts: Vec<f64>, n: f64 },
    Moments { sum: f64, sum_sq: f64, n: f64 },
}

impl Stats {
    fn empty(targets: &Targets) -> Self {
        match targets {
            Targets::Classes { n_classes, .. } => Stats::Counts {
                counts: vec![0.0; *n_classes],
                n: 0.0,
            },
            Targets::Values(_) => Stats::Moments {
                sum: 0.0,
                sum_sq: 0.0,
                n: 0.0,
            },
        }
    }

    fn add(&mut self, targets: &Targets, i: usize, sign: f64) {
        match (self, targets) {
            (Stats::Counts { counts, n }, Targets::Classes { labels, .. }) => {
                counts[labels[i]] += sign;
                *n += sign;
            }
            (Stats::Moments { sum, sum_sq, n }, Targets::Values(v)) => {
                *sum += sign * v[i];
                *sum_sq += sign * v[i] * v[i];
                *n += sign;
            }
            _ => unreachable!("stats and targets disagree"),
        }
    }

    /// Impurity times node size: `n * gini` or the residual sum of squares.
    fn cost(&self) -> f64 {
        match self {
            Stats::Counts { counts, n } => {
                if *n <= 0.0 {
                    0.0
                } else {
                    n - counts.iter().map(|c| c * c).sum::<f64>() / n
                }
            }
            Stats::Moments { sum, sum_sq, n } => {
                if *n <= 0.0 {
                    0.0
                } else {
                    (sum_sq - sum * sum / n).max(0.0)
                }
            }
        }
    }

    fn leaf_value(&self) -> Vec<f64> {
        match self {
            Stats::Counts { counts, n } => counts.iter().map(|c| c / n).collect(),
            Stats::Moments { sum, n, .. } => vec![sum / n],
        }
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

pub(crate) struct TreeBuilder<'a, R: Rng> {
    x: &'a [Vec<f64>],
    targets: Targets<'a>,
    params: GrowParams,
    rng: &'a mut R,
    nodes: Vec<TreeNode>,
}

impl<'a, R: Rng> TreeBuilder<'a, R> {
    pub fn new(x: &'a [Vec<f64>], targets: Targets<'a>, params: GrowParams, rng: &'a mut R) -> Self {
        Self {
            x,
            targets,
            params,
            rng,
            nodes: Vec::new(),
        }
    }

    /// Grows a tree on the given rows; repeated indices act as weights.
    pub fn grow(mut self, rows: Vec<usize>) -> DecisionTree {
        self.grow_node(rows, 0);
        DecisionTree { nodes: self.nodes }
    }

    fn stats_of(&self, rows: &[usize]) -> Stats {
        let mut s = Stats::empty(&self.targets);
        for &i in rows {
            s.add(&self.targets, i, 1.0);
        }
        s
    }

    fn grow_node(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let stats = self.stats_of(&rows);
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value: stats.leaf_value(),
        });

        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        let min_leaf = self.params.min_leaf.max(1);
        if !depth_ok || rows.len() < 2 * min_leaf || stats.cost() <= MIN_GAIN {
            return id;
        }
        let Some(split) = self.best_split(&rows, &stats) else {
            return id;
        };
        let left = self.grow_node(split.left, depth + 1);
        let right = self.grow_node(split.right, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let dim = self.x.first().map_or(0, Vec::len);
        match self.params.features_per_split {
            Some(m) if m < dim => {
                let mut picked = sample(self.rng, dim, m.max(1)).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..dim).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], parent: &Stats) -> Option<Split> {
        let parent_cost = parent.cost();
        let min_leaf = self.params.min_leaf.max(1);
        let n = rows.len();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = rows.to_vec();

        for feature in self.candidate_features() {
            let x = self.x;
            order.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]).then(a.cmp(&b)));
            let mut left = Stats::empty(&self.targets);
            let mut right = parent.clone();
            for p in 1..n {
                let moved = order[p - 1];
                left.add(&self.targets, moved, 1.0);
                right.add(&self.targets, moved, -1.0);
                if p < min_leaf || n - p < min_leaf {
                    continue;
                }
                let (lo, hi) = (x[order[p - 1]][feature], x[order[p]][feature]);
                if lo >= hi {
                    continue;
                }
                let gain = parent_cost - left.cost() - right.cost();
                if gain > MIN_GAIN && best.is_none_or(|b| gain > b.2) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((feature, threshold, gain));
                }
            }
        }

        let (feature, threshold, _) = best?;
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
        Some(Split {
            feature,
            threshold,
            left,
            right,
        })
    }
}

/// Gini impurity of a label multiset.
pub fn gini(labels: &[usize], n_classes: usize) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let mut counts = vec![0.0; n_classes];
    for &l in labels {
        counts[l] += 1.0;
    }
    let n = labels.len() as f64;
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}
