//! k-means and agglomerative hierarchical clustering.
//!
//! Agglomeration uses the nearest-neighbour chain algorithm with
//! Lance–Williams distance updates, which is exact for the four supported
//! (reducible) linkages and runs in `O(n^2)` memory and time. Merge ids
//! follow the usual convention: leaves are `0..n`, the cluster formed by
//! merge `i` is `n + i`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("k = {k} exceeds the number of samples ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("cannot cut {n} points into {requested} clusters")]
    InvalidClusterCount { requested: usize, n: usize },
    #[error("clustering needs at least {min} samples, got {n}")]
    EmptyInput { n: usize, min: usize },
    #[error("length mismatch: {left} labels vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("row {row} has {got} features, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Ward,
    Average,
    Complete,
    Single,
}

impl Linkage {
    pub const ALL: [Linkage; 4] = [Linkage::Ward, Linkage::Average, Linkage::Complete, Linkage::Single];

    pub fn as_str(self) -> &'static str {
        match self {
            Linkage::Ward => "ward",
            Linkage::Average => "average",
            Linkage::Complete => "complete",
            Linkage::Single => "single",
        }
    }

    /// Distance from `k` to the union of `x` and `y`.
    fn update(self, dkx: f64, dky: f64, dxy: f64, nk: f64, nx: f64, ny: f64) -> f64 {
        match self {
            Linkage::Single => dkx.min(dky),
            Linkage::Complete => dkx.max(dky),
            Linkage::Average => (nx * dkx + ny * dky) / (nx + ny),
            Linkage::Ward => {
                let t = ((nx + nk) * dkx * dkx + (ny + nk) * dky * dky - nk * dxy * dxy) / (nx + ny + nk);
                t.max(0.0).sqrt()
            }
        }
    }
}

impl std::str::FromStr for Linkage {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Linkage::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| ClusterError::InvalidParameter(format!("unknown linkage `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterQuality {
    /// Within-cluster sum of squared distances (k-means).
    Inertia(f64),
    /// Height of the last merge kept by a dendrogram cut (0 for singletons).
    MergeHeight(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
    pub quality: ClusterQuality,
}

impl ClusterAssignment {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

fn check_matrix(x: &[Vec<f64>], min: usize) -> Result<usize, ClusterError> {
    if x.len() < min {
        return Err(ClusterError::EmptyInput { n: x.len(), min });
    }
    let dim = x[0].len();
    for (row, r) in x.iter().enumerate() {
        if r.len() != dim {
            return Err(ClusterError::DimensionMismatch { row, expected: dim, got: r.len() });
        }
    }
    Ok(dim)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

// ---------------------------------------------------------------- k-means

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KmeansInit {
    /// k-means++ seeding, one draw per restart.
    PlusPlus,
    /// Every k-subset of the rows as starting centers; `n_init` is ignored.
    /// Only for small inputs.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmeansParams {
    pub k: usize,
    pub max_iter: usize,
    pub n_init: usize,
    pub seed: u64,
    pub init: KmeansInit,
}

impl KmeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iter: 300,
            n_init: 10,
            seed,
            init: KmeansInit::PlusPlus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    pub assignment: ClusterAssignment,
    pub centers: Vec<Vec<f64>>,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
    pub converged: bool,
}

impl KmeansResult {
    pub fn inertia(&self) -> f64 {
        match self.assignment.quality {
            ClusterQuality::Inertia(v) => v,
            ClusterQuality::MergeHeight(_) => unreachable!("k-means always reports inertia"),
        }
    }
}

/// Largest input for which exhaustive seeding is accepted.
const EXHAUSTIVE_MAX_SUBSETS: u128 = 100_000;

fn plus_plus_seeds(x: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = x.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = x.iter().map(|r| sq_dist(r, &x[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total has a positive weight")
        } else {
            // every point coincides with a center already; take unused rows in order
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (d, r) in d2.iter_mut().zip(x) {
            *d = d.min(sq_dist(r, &x[next]));
        }
    }
    chosen
}

fn nearest(row: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(row, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

struct LloydRun {
    labels: Vec<usize>,
    centers: Vec<Vec<f64>>,
    trace: Vec<f64>,
    converged: bool,
}

fn lloyd(x: &[Vec<f64>], mut centers: Vec<Vec<f64>>, max_iter: usize) -> LloydRun {
    let k = centers.len();
    let dim = x[0].len();
    let mut labels = vec![usize::MAX; x.len()];
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut dists = Vec::with_capacity(x.len());
        for (row, label) in x.iter().zip(labels.iter_mut()) {
            let (c, d) = nearest(row, &centers);
            changed |= *label != c;
            *label = c;
            dists.push(d);
        }
        // reseed empty clusters with the points farthest from their centers
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&l| sizes[l] += 1);
        for empty in (0..k).filter(|&c| sizes[c] == 0).collect::<Vec<_>>() {
            let far = (0..x.len())
                .filter(|&i| sizes[labels[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .expect("k <= n leaves a donor cluster");
            sizes[labels[far]] -= 1;
            sizes[empty] = 1;
            labels[far] = empty;
            dists[far] = 0.0;
            centers[empty] = x[far].clone();
            changed = true;
        }
        trace.push(dists.iter().sum());
        if !changed {
            converged = true;
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        for (row, &l) in x.iter().zip(&labels) {
            for (s, v) in sums[l].iter_mut().zip(row) {
                *s += v;
            }
        }
        for ((center, sum), &size) in centers.iter_mut().zip(sums).zip(&sizes) {
            *center = sum.into_iter().map(|s| s / size as f64).collect();
        }
    }
    LloydRun { labels, centers, trace, converged }
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=n - (k - cur.len()) {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Lloyd's algorithm; the restart with the lowest final inertia wins, ties to
/// the earliest restart.
pub fn kmeans(x: &[Vec<f64>], params: &KmeansParams) -> Result<KmeansResult, ClusterError> {
    check_matrix(x, 1)?;
    let n = x.len();
    let k = params.k;
    if k == 0 {
        return Err(ClusterError::InvalidParameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(ClusterError::KTooLarge { k, n });
    }
    let seeds: Vec<Vec<usize>> = match params.init {
        KmeansInit::PlusPlus => {
            if params.n_init == 0 {
                return Err(ClusterError::InvalidParameter("n_init must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            (0..params.n_init).map(|_| plus_plus_seeds(x, k, &mut rng)).collect()
        }
        KmeansInit::Exhaustive => {
            if binomial(n, k) > EXHAUSTIVE_MAX_SUBSETS {
                return Err(ClusterError::InvalidParameter(format!(
                    "exhaustive seeding of {n} points into {k} clusters is too large"
                )));
            }
            k_subsets(n, k)
        }
    };
    let runs: Vec<LloydRun> = seeds
        .par_iter()
        .map(|s| lloyd(x, s.iter().map(|&i| x[i].clone()).collect(), params.max_iter))
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.trace.last() < a.trace.last() { b } else { a })
        .expect("at least one restart");
    let inertia = *best.trace.last().expect("at least one iteration");
    Ok(KmeansResult {
        assignment: ClusterAssignment {
            labels: best.labels,
            k,
            quality: ClusterQuality::Inertia(inertia),
        },
        centers: best.centers,
        inertia_trace: best.trace,
        converged: best.converged,
    })
}

// ---------------------------------------------------------- agglomeration

struct Condensed {
    n: usize,
    d: Vec<f64>,
}

impl Condensed {
    fn new(x: &[Vec<f64>]) -> Self {
        let n = x.len();
        let d = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (i + 1..n).map(move |j| sq_dist(&x[i], &x[j]).sqrt()))
            .collect();
        Self { n, d }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.n * i - i * (i + 1) / 2 + j - i - 1
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.idx(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let at = self.idx(i, j);
        self.d[at] = v;
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        self.parent[rb] = ra;
        ra
    }
}

/// Full merge tree of `x` under `linkage` with Euclidean distances.
///
/// Ward heights use the `sqrt(2 |A||B| / (|A|+|B|)) * ||c_A - c_B||`
/// convention, so two singletons merge at their Euclidean distance.
pub fn agglomerate(x: &[Vec<f64>], linkage: Linkage) -> Result<Dendrogram, ClusterError> {
    check_matrix(x, 2)?;
    let n = x.len();
    let mut dist = Condensed::new(x);
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    // (slot x, slot y, height); a slot always holds a leaf of its cluster
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::with_capacity(n);

    for _ in 0..n - 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("two active clusters remain"));
        }
        let (x_slot, y_slot, height) = loop {
            let tip = *chain.last().expect("chain is non-empty");
            let prev = (chain.len() >= 2).then(|| chain[chain.len() - 2]);
            // prefer the previous chain element on ties so the chain terminates
            let (mut best, mut best_d) = match prev {
                Some(p) => (p, dist.get(tip, p)),
                None => (usize::MAX, f64::INFINITY),
            };
            for k in (0..n).filter(|&k| active[k] && k != tip) {
                let d = dist.get(tip, k);
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            if Some(best) == prev {
                chain.truncate(chain.len() - 2);
                break (tip, best, best_d);
            }
            chain.push(best);
        };

        let (keep, gone) = (x_slot.max(y_slot), x_slot.min(y_slot));
        let (nk_keep, nk_gone) = (size[keep] as f64, size[gone] as f64);
        for k in (0..n).filter(|&k| active[k] && k != keep && k != gone) {
            let updated = linkage.update(
                dist.get(k, gone),
                dist.get(k, keep),
                height,
                size[k] as f64,
                nk_gone,
                nk_keep,
            );
            dist.set(k, keep, updated);
        }
        active[gone] = false;
        size[keep] += size[gone];
        raw.push((gone, keep, height));
    }

    // NN-chain finds merges out of order; replay them by height
    raw.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut uf = UnionFind::new(n);
    let mut cluster_id: Vec<usize> = (0..n).collect();
    let mut cluster_size = vec![1usize; n];
    let merges = raw
        .into_iter()
        .enumerate()
        .map(|(step, (p, q, height))| {
            let (rp, rq) = (uf.find(p), uf.find(q));
            let (ia, ib) = (cluster_id[rp], cluster_id[rq]);
            let merged = cluster_size[rp] + cluster_size[rq];
            let root = uf.union(rp, rq);
            cluster_id[root] = n + step;
            cluster_size[root] = merged;
            Merge {
                a: ia.min(ib),
                b: ia.max(ib),
                height,
                size: merged,
            }
        })
        .collect();
    Ok(Dendrogram {
        n_leaves: n,
        linkage,
        merges,
    })
}

/// Flat partition left after undoing the last `n_clusters - 1` merges.
///
/// Labels are numbered in order of first appearance over the leaves.
pub fn cut_dendrogram(d: &Dendrogram, n_clusters: usize) -> Result<ClusterAssignment, ClusterError> {
    let n = d.n_leaves;
    if n_clusters == 0 || n_clusters > n {
        return Err(ClusterError::InvalidClusterCount { requested: n_clusters, n });
    }
    let applied = n - n_clusters;
    // leaf representative of every cluster id
    let mut rep: Vec<usize> = (0..n).collect();
    let mut uf = UnionFind::new(n);
    for m in &d.merges[..applied] {
        let (ra, rb) = (rep[m.a], rep[m.b]);
        rep.push(uf.union(ra, rb));
    }
    let mut label_of_root = vec![usize::MAX; n];
    let mut next = 0;
    let labels = (0..n)
        .map(|i| {
            let root = uf.find(i);
            if label_of_root[root] == usize::MAX {
                label_of_root[root] = next;
                next += 1;
            }
            label_of_root[root]
        })
        .collect();
    let height = if applied == 0 { 0.0 } else { d.merges[applied - 1].height };
    Ok(ClusterAssignment {
        labels,
        k: n_clusters,
        quality: ClusterQuality::MergeHeight(height),
    })
}

/// Share of points that belong to the majority class of their cluster.
pub fn cluster_purity(assignment: &[usize], truth: &[usize]) -> Result<f64, ClusterError> {
    if assignment.len() != truth.len() {
        return Err(ClusterError::LengthMismatch { left: assignment.len(), right: truth.len() });
    }
    if assignment.is_empty() {
        return Err(ClusterError::EmptyInput { n: 0, min: 1 });
    }
    let mut counts: std::collections::BTreeMap<usize, std::collections::BTreeMap<usize, usize>> = Default::default();
    for (&c, &t) in assignment.iter().zip(truth) {
        *counts.entry(c).or_default().entry(t).or_default() += 1;
    }
    let majority: usize = counts.values().map(|m| m.values().copied().max().unwrap_or(0)).sum();
    Ok(majority as f64 / assignment.len() as f64)
}

pub fn write_dendrogram_csv<W: Write>(out: W, d: &Dendrogram) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["merge_index", "a", "b", "height", "size"])?;
    for (i, m) in d.merges.iter().enumerate() {
        w.write_record([
            i.to_string(),
            m.a.to_string(),
            m.b.to_string(),
            m.height.to_string(),
            m.size.to_string(),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gaussian_blobs;
    use proptest::{prop_assert, prop_assert_eq, proptest};

    /// Greedy agglomeration recomputing every linkage from the raw points.
    fn brute_force(x: &[Vec<f64>], linkage: Linkage) -> Vec<(usize, usize, f64)> {
        let n = x.len();
        let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
        let dist = |a: &[usize], b: &[usize]| -> f64 {
            let pair = || a.iter().flat_map(|&i| b.iter().map(move |&j| sq_dist(&x[i], &x[j]).sqrt()));
            match linkage {
                Linkage::Single => pair().fold(f64::INFINITY, f64::min),
                Linkage::Complete => pair().fold(0.0, f64::max),
                Linkage::Average => pair().sum::<f64>() / (a.len() * b.len()) as f64,
                Linkage::Ward => {
                    let centroid = |s: &[usize]| -> Vec<f64> {
                        (0..x[0].len())
                            .map(|f| s.iter().map(|&i| x[i][f]).sum::<f64>() / s.len() as f64)
                            .collect()
                    };
                    let (na, nb) = (a.len() as f64, b.len() as f64);
                    (2.0 * na * nb / (na + nb)).sqrt() * sq_dist(&centroid(a), &centroid(b)).sqrt()
                }
            }
        };
        let mut out = Vec::new();
        for step in 0..n - 1 {
            let mut best = (0, 1, f64::INFINITY);
            for i in 0..clusters.len() {
                for j in i + 1..clusters.len() {
                    let d = dist(&clusters[i].1, &clusters[j].1);
                    if d < best.2 {
                        best = (i, j, d);
                    }
                }
            }
            let (i, j, h) = best;
            let (id_j, members_j) = clusters.remove(j);
            let (id_i, members_i) = clusters.remove(i);
            out.push((id_i.min(id_j), id_i.max(id_j), h));
            clusters.push((n + step, [members_i, members_j].concat()));
        }
        out
    }

    fn random_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect()).collect()
    }

    #[test]
    fn matches_brute_force_for_small_inputs() {
        for seed in 0..25 {
            for n in 2..=12 {
                let x = random_points(n, 3, seed * 100 + n as u64);
                for linkage in Linkage::ALL {
                    let d = agglomerate(&x, linkage).unwrap();
                    let reference = brute_force(&x, linkage);
                    assert_eq!(d.merges.len(), n - 1);
                    for (m, r) in d.merges.iter().zip(&reference) {
                        assert_eq!((m.a, m.b), (r.0, r.1), "{linkage:?} n={n} seed={seed}");
                        assert!((m.height - r.2).abs() <= 1e-9 * r.2.max(1.0));
                    }
                }
            }
        }
    }

    #[test]
    fn three_points_single_linkage() {
        let x = vec![vec![0.0], vec![1.0], vec![10.0]];
        let d = agglomerate(&x, Linkage::Single).unwrap();
        assert_eq!(d.merges[0], Merge { a: 0, b: 1, height: 1.0, size: 2 });
        assert_eq!(d.merges[1], Merge { a: 2, b: 3, height: 9.0, size: 3 });
        let two = cut_dendrogram(&d, 2).unwrap();
        assert_eq!(two.labels, vec![0, 0, 1]);
        assert_eq!(cut_dendrogram(&d, 1).unwrap().labels, vec![0, 0, 0]);
        assert_eq!(cut_dendrogram(&d, 3).unwrap().labels, vec![0, 1, 2]);
        assert!(matches!(cut_dendrogram(&d, 4), Err(ClusterError::InvalidClusterCount { .. })));
        assert!(matches!(cut_dendrogram(&d, 0), Err(ClusterError::InvalidClusterCount { .. })));
    }

    #[test]
    fn two_points_merge_at_their_distance() {
        let d = agglomerate(&[vec![0.0, 0.0], vec![3.0, 4.0]], Linkage::Ward).unwrap();
        assert_eq!(d.merges, vec![Merge { a: 0, b: 1, height: 5.0, size: 2 }]);
        assert!(matches!(agglomerate(&[vec![1.0]], Linkage::Ward), Err(ClusterError::EmptyInput { .. })));
    }

    #[test]
    fn heights_are_monotone_and_sizes_add_up() {
        let x = random_points(200, 5, 3);
        for linkage in Linkage::ALL {
            let d = agglomerate(&x, linkage).unwrap();
            let mut sizes = vec![1usize; x.len()];
            for w in d.merges.windows(2) {
                assert!(w[1].height >= w[0].height - 1e-9, "{linkage:?}");
            }
            for m in &d.merges {
                assert_eq!(m.size, sizes[m.a] + sizes[m.b]);
                sizes.push(m.size);
            }
            assert_eq!(d.merges.last().unwrap().size, 200);
        }
    }

    #[test]
    fn cuts_are_nested() {
        let x = random_points(60, 4, 8);
        let d = agglomerate(&x, Linkage::Ward).unwrap();
        let mut coarser = cut_dendrogram(&d, 1).unwrap();
        for k in 2..=60 {
            let finer = cut_dendrogram(&d, k).unwrap();
            assert_eq!(finer.cluster_sizes().iter().filter(|&&s| s > 0).count(), k);
            // every finer cluster lies inside a single coarser cluster
            let mut parent = vec![usize::MAX; k];
            for (f, c) in finer.labels.iter().zip(&coarser.labels) {
                assert!(parent[*f] == usize::MAX || parent[*f] == *c);
                parent[*f] = *c;
            }
            coarser = finer;
        }
    }

    #[test]
    fn kmeans_recovers_two_blobs() {
        let ds = gaussian_blobs(100, 2, 17, 1.0, 21);
        let result = kmeans(ds.features(), &KmeansParams::new(2, 0)).unwrap();
        assert_eq!(cluster_purity(&result.assignment.labels, ds.labels()).unwrap(), 1.0);
        assert!(result.converged);
    }

    #[test]
    fn kmeans_trace_never_increases() {
        let x = random_points(300, 4, 2);
        for seed in 0..5 {
            let result = kmeans(&x, &KmeansParams { n_init: 1, ..KmeansParams::new(7, seed) }).unwrap();
            assert!(result.inertia_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
            assert!(result.assignment.cluster_sizes().iter().all(|&s| s > 0));
        }
    }

    #[test]
    fn kmeans_with_k_equal_n() {
        let x = random_points(9, 2, 4);
        let result = kmeans(&x, &KmeansParams::new(9, 1)).unwrap();
        assert_eq!(result.inertia(), 0.0);
        let mut labels = result.assignment.labels.clone();
        labels.sort_unstable();
        assert_eq!(labels, (0..9).collect::<Vec<_>>());
        assert_eq!(kmeans(&x, &KmeansParams::new(10, 1)).unwrap_err(), ClusterError::KTooLarge { k: 10, n: 9 });
    }

    #[test]
    fn kmeans_reseeds_empty_clusters() {
        // duplicated points force centers to collide
        let x = vec![vec![0.0], vec![0.0], vec![0.0], vec![5.0]];
        let result = kmeans(&x, &KmeansParams::new(3, 0)).unwrap();
        assert!(result.assignment.cluster_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn exhaustive_seeding_ignores_row_order() {
        let x = random_points(8, 2, 13);
        let params = KmeansParams { init: KmeansInit::Exhaustive, ..KmeansParams::new(3, 0) };
        let base = kmeans(&x, &params).unwrap().inertia();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let mut shuffled = x.clone();
            rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
            assert!((kmeans(&shuffled, &params).unwrap().inertia() - base).abs() < 1e-9);
        }
    }

    #[test]
    fn purity_examples() {
        assert_eq!(cluster_purity(&[0, 1, 2], &[2, 0, 1]).unwrap(), 1.0);
        assert_eq!(cluster_purity(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert_eq!(cluster_purity(&[0, 0, 0, 1, 1], &[0, 0, 1, 1, 1]).unwrap(), 0.8);
        assert!(matches!(cluster_purity(&[0], &[0, 1]), Err(ClusterError::LengthMismatch { .. })));
    }

    #[test]
    fn dendrogram_csv_layout() {
        let d = agglomerate(&[vec![0.0], vec![1.0], vec![10.0]], Linkage::Single).unwrap();
        let mut buf = Vec::new();
        write_dendrogram_csv(&mut buf, &d).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "merge_index,a,b,height,size\n0,0,1,1,2\n1,2,3,9,3\n");
    }

    proptest! {
        #[test]
        fn thirty_cluster_cut_is_exact(n in 30usize..90, seed in 0u64..1000) {
            let x = random_points(n, 3, seed);
            let d = agglomerate(&x, Linkage::Ward).unwrap();
            let cut = cut_dendrogram(&d, 30).unwrap();
            prop_assert!(cut.cluster_sizes().iter().all(|&s| s > 0));
            prop_assert_eq!(cut.labels.iter().max().copied(), Some(29));
        }
    }
}
