//! Supervised learners behind one train / predict / persist interface.
//!
//! Every learner standardizes its inputs with a [`Scaler`] fitted on the
//! training rows and stored inside the [`TrainedModel`], so callers always
//! pass raw feature vectors.

pub mod boosted;
pub mod forest;
pub mod logistic;
pub mod svm;
pub mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{DatasetError, LabeledDataset, Scaler};

pub use boosted::BoostedModel;
pub use forest::ForestModel;
pub use logistic::LogisticModel;
pub use svm::{rbf_kernel, SvmModel};
pub use tree::{DecisionTree, TreeNode};

/// Version of the model JSON layout written by [`save_model`].
pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("input contains a non-finite value at position {0}")]
    NonFiniteInput(usize),
    #[error("training data contains only one class")]
    SingleClassInput,
    #[error("training data is empty")]
    EmptyInput,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("model schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u64 },
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Tree,
    Forest,
    Boosted,
    SvmRbf,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
            ModelKind::Boosted => "boosted",
            ModelKind::SvmRbf => "svm_rbf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            learning_rate: 0.5,
            epochs: 2000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// `None` means `floor(sqrt(n_features))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: None,
            min_leaf: 1,
            features_per_split: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub tree_depth: usize,
    pub min_leaf: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            tree_depth: 3,
            min_leaf: 1,
        }
    }
}

impl BoostParams {
    /// Stand-in for the XGBoost row: its stock depth and step size.
    pub fn xgboost_preset() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.3,
            tree_depth: 6,
            min_leaf: 1,
        }
    }

    /// Stand-in for the LightGBM row: shallower trees, smaller steps.
    pub fn lightgbm_preset() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            tree_depth: 5,
            min_leaf: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    /// `1 / (n_features * var(X))` on the scaled training matrix.
    Scale,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: Gamma,
    pub tol: f64,
    /// Iteration budget per binary problem, in multiples of its size.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            gamma: Gamma::Scale,
            tol: 1e-3,
            max_passes: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyperparams {
    Logistic(LogisticParams),
    Tree(TreeParams),
    Forest(ForestParams),
    Boosted(BoostParams),
    SvmRbf(SvmParams),
}

impl Hyperparams {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparams::Logistic(_) => ModelKind::Logistic,
            Hyperparams::Tree(_) => ModelKind::Tree,
            Hyperparams::Forest(_) => ModelKind::Forest,
            Hyperparams::Boosted(_) => ModelKind::Boosted,
            Hyperparams::SvmRbf(_) => ModelKind::SvmRbf,
        }
    }

    /// Defaults by name: `logistic`, `tree`, `forest`, `boosted`, `xgboost`,
    /// `lightgbm`, `svm`.
    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "logistic" => Hyperparams::Logistic(LogisticParams::default()),
            "tree" => Hyperparams::Tree(TreeParams::default()),
            "forest" => Hyperparams::Forest(ForestParams::default()),
            "boosted" => Hyperparams::Boosted(BoostParams::default()),
            "xgboost" | "xgb" => Hyperparams::Boosted(BoostParams::xgboost_preset()),
            "lightgbm" | "lgbm" => Hyperparams::Boosted(BoostParams::lightgbm_preset()),
            "svm" | "svm_rbf" => Hyperparams::SvmRbf(SvmParams::default()),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |msg: String| Err(LearnError::InvalidHyperparameter(msg));
        match *self {
            Hyperparams::Logistic(p) => {
                if !(p.l2 >= 0.0) || !(p.learning_rate > 0.0) || !p.l2.is_finite() {
                    return bad(format!("logistic needs l2 >= 0 and learning_rate > 0, got {p:?}"));
                }
            }
            Hyperparams::Tree(p) => {
                if p.min_leaf == 0 {
                    return bad("min_leaf must be at least 1".into());
                }
            }
            Hyperparams::Forest(p) => {
                if p.n_trees == 0 || p.min_leaf == 0 || p.features_per_split == Some(0) {
                    return bad(format!("forest needs positive n_trees, min_leaf and features_per_split, got {p:?}"));
                }
            }
            Hyperparams::Boosted(p) => {
                if !(p.learning_rate >= 0.0) || p.tree_depth == 0 || p.min_leaf == 0 {
                    return bad(format!("boosting needs learning_rate >= 0 and positive depth, got {p:?}"));
                }
            }
            Hyperparams::SvmRbf(p) => {
                if !(p.c > 0.0) || !(p.tol > 0.0) || p.max_passes == 0 {
                    return bad(format!("svm needs C > 0, tol > 0 and max_passes > 0, got {p:?}"));
                }
                if let Gamma::Value(g) = p.gamma {
                    if !(g > 0.0 && g.is_finite()) {
                        return bad(format!("gamma must be positive, got {g}"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// What to train and with which seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub hyperparams: Hyperparams,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(hyperparams: Hyperparams, seed: u64) -> Self {
        Self { hyperparams, seed }
    }
}

/// The six rows of the model comparison as `(preset key, display name)`.
pub const ROSTER: [(&str, &str); 6] = [
    ("logistic", "Logistic Regression"),
    ("tree", "Decision Tree"),
    ("lightgbm", "LGBM"),
    ("xgboost", "XG Boost"),
    ("forest", "Random Forest"),
    ("svm", "SVM"),
];

/// [`ROSTER`] as display name and default hyperparameters.
pub fn model_roster() -> Vec<(&'static str, Hyperparams)> {
    ROSTER
        .iter()
        .map(|&(key, name)| (name, Hyperparams::preset(key).expect("roster keys are presets")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParams {
    Logistic(LogisticModel),
    Tree(DecisionTree),
    Forest(ForestModel),
    Boosted(BoostedModel),
    SvmRbf(SvmModel),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Logistic(_) => ModelKind::Logistic,
            ModelParams::Tree(_) => ModelKind::Tree,
            ModelParams::Forest(_) => ModelKind::Forest,
            ModelParams::Boosted(_) => ModelKind::Boosted,
            ModelParams::SvmRbf(_) => ModelKind::SvmRbf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub hyperparams: Hyperparams,
    pub dataset_sha: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    /// Per-class scores: probabilities, vote shares or vote counts by model kind.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub class_names: Vec<String>,
    pub scaler: Scaler,
    pub params: ModelParams,
    pub meta: TrainingMeta,
}

/// Index of the first maximum.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    pub fn n_features(&self) -> usize {
        self.scaler.dim()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Scores on already-scaled input.
    fn scores_scaled(&self, z: &[f64]) -> Vec<f64> {
        match &self.params {
            ModelParams::Logistic(m) => m.probabilities(z),
            ModelParams::Tree(t) => t.leaf_value(z).to_vec(),
            ModelParams::Forest(f) => f.vote_shares(z),
            ModelParams::Boosted(b) => b.probabilities(z),
            ModelParams::SvmRbf(s) => s.votes(z),
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction, LearnError> {
        if features.len() != self.n_features() {
            return Err(LearnError::DimensionMismatch {
                expected: self.n_features(),
                got: features.len(),
            });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(LearnError::NonFiniteInput(pos));
        }
        let scores = self.scores_scaled(&self.scaler.transform_row(features));
        Ok(Prediction {
            class: argmax(&scores),
            scores,
        })
    }

    pub fn predict_labels(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>, LearnError> {
        rows.iter().map(|r| self.predict(r).map(|p| p.class)).collect()
    }

    /// Self-describing JSON document with a content checksum.
    pub fn to_json(&self) -> Result<String, LearnError> {
        let doc = ModelDocument {
            schema_version: SCHEMA_VERSION,
            kind: self.kind(),
            class_names: self.class_names.clone(),
            scaler: self.scaler.clone(),
            params: self.params.clone(),
            meta: self.meta.clone(),
        };
        let mut value = serde_json::to_value(&doc)
            .map_err(|e| LearnError::CorruptModel(format!("serializing: {e}")))?;
        let checksum = checksum_of(&value)?;
        value
            .as_object_mut()
            .expect("model document is an object")
            .insert("checksum".into(), serde_json::Value::String(checksum));
        let mut text = serde_json::to_string_pretty(&value)
            .map_err(|e| LearnError::CorruptModel(format!("serializing: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let mut value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| LearnError::CorruptModel(format!("not valid JSON: {e}")))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| LearnError::CorruptModel("top level is not an object".into()))?;
        let found = obj
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| LearnError::CorruptModel("missing schema_version".into()))?;
        if found != SCHEMA_VERSION {
            return Err(LearnError::SchemaVersionMismatch {
                found,
                expected: SCHEMA_VERSION,
            });
        }
        let stored = match obj.remove("checksum") {
            Some(serde_json::Value::String(s)) => s,
            _ => return Err(LearnError::CorruptModel("missing checksum".into())),
        };
        let actual = checksum_of(&value)?;
        if stored != actual {
            return Err(LearnError::CorruptModel(format!(
                "checksum mismatch: stored {stored}, content hashes to {actual}"
            )));
        }
        let doc: ModelDocument = serde_json::from_value(value)
            .map_err(|e| LearnError::CorruptModel(format!("unexpected layout: {e}")))?;
        if doc.kind != doc.params.kind() {
            return Err(LearnError::CorruptModel(format!(
                "kind `{}` does not match `{}` parameters",
                doc.kind.as_str(),
                doc.params.kind().as_str()
            )));
        }
        Ok(Self {
            class_names: doc.class_names,
            scaler: doc.scaler,
            params: doc.params,
            meta: doc.meta,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    schema_version: u64,
    kind: ModelKind,
    class_names: Vec<String>,
    scaler: Scaler,
    params: ModelParams,
    meta: TrainingMeta,
}

fn checksum_of(value: &serde_json::Value) -> Result<String, LearnError> {
    // object keys serialize in sorted order, so this is canonical
    let bytes = serde_json::to_vec(value)
        .map_err(|e| LearnError::CorruptModel(format!("serializing: {e}")))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), LearnError> {
    std::fs::write(path, model.to_json()?).map_err(|source| LearnError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<TrainedModel, LearnError> {
    let text = std::fs::read_to_string(path).map_err(|source| LearnError::Io {
        path: path.display().to_string(),
        source,
    })?;
    TrainedModel::from_json(&text)
}

fn distinct_classes(labels: &[usize]) -> usize {
    let mut seen: Vec<usize> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Fits a scaler on `ds`, trains the requested learner on scaled rows and
/// packages both.
pub fn train(spec: &ClassifierSpec, ds: &LabeledDataset) -> Result<TrainedModel, LearnError> {
    spec.hyperparams.validate()?;
    if ds.is_empty() {
        return Err(LearnError::EmptyInput);
    }
    let scaler = Scaler::fit(ds.features())?;
    let x = scaler.transform(ds.features());
    let y = ds.labels();
    let k = ds.n_classes();
    let needs_two = matches!(spec.hyperparams, Hyperparams::Logistic(_) | Hyperparams::SvmRbf(_));
    if needs_two && distinct_classes(y) < 2 {
        return Err(LearnError::SingleClassInput);
    }

    let params = match spec.hyperparams {
        Hyperparams::Logistic(p) => ModelParams::Logistic(logistic::fit(
            &x,
            y,
            k,
            &logistic::GdSettings {
                l2: p.l2,
                learning_rate: p.learning_rate,
                epochs: p.epochs,
                tol: p.tol,
            },
        )),
        Hyperparams::Tree(p) => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
            let grow = tree::GrowParams {
                max_depth: p.max_depth,
                min_leaf: p.min_leaf,
                features_per_split: None,
            };
            ModelParams::Tree(
                tree::TreeBuilder::new(&x, tree::Targets::Classes { labels: y, n_classes: k }, grow, &mut rng)
                    .grow((0..y.len()).collect()),
            )
        }
        Hyperparams::Forest(p) => {
            let dim = ds.n_features();
            let per_split = p
                .features_per_split
                .unwrap_or_else(|| ((dim as f64).sqrt().floor() as usize).max(1));
            ModelParams::Forest(forest::fit(
                &x,
                y,
                k,
                &forest::ForestSettings {
                    n_trees: p.n_trees,
                    grow: tree::GrowParams {
                        max_depth: p.max_depth,
                        min_leaf: p.min_leaf,
                        features_per_split: Some(per_split),
                    },
                    bootstrap: p.bootstrap,
                },
                spec.seed,
            ))
        }
        Hyperparams::Boosted(p) => ModelParams::Boosted(boosted_fit(&x, y, k, &p, spec.seed).0),
        Hyperparams::SvmRbf(p) => {
            let gamma = match p.gamma {
                Gamma::Scale => svm::scale_gamma(&x),
                Gamma::Value(g) => g,
            };
            ModelParams::SvmRbf(svm::fit_ovo(
                &x,
                y,
                k,
                svm::SmoSettings {
                    c: p.c,
                    gamma,
                    tol: p.tol,
                    max_passes: p.max_passes,
                },
            )?)
        }
    };
    Ok(TrainedModel {
        class_names: ds.class_names().to_vec(),
        scaler,
        params,
        meta: TrainingMeta {
            seed: spec.seed,
            hyperparams: spec.hyperparams,
            dataset_sha: ds.fingerprint(),
        },
    })
}

fn boosted_fit(
    x: &[Vec<f64>],
    y: &[usize],
    k: usize,
    p: &BoostParams,
    seed: u64,
) -> (BoostedModel, Vec<f64>) {
    boosted::fit(
        x,
        y,
        k,
        &boosted::BoostSettings {
            n_rounds: p.n_rounds,
            learning_rate: p.learning_rate,
            tree_depth: p.tree_depth,
            min_leaf: p.min_leaf,
        },
        seed,
    )
}

pub fn train_logistic(ds: &LabeledDataset, params: LogisticParams, seed: u64) -> Result<TrainedModel, LearnError> {
    train(&ClassifierSpec::new(Hyperparams::Logistic(params), seed), ds)
}

pub fn train_tree(ds: &LabeledDataset, params: TreeParams, seed: u64) -> Result<TrainedModel, LearnError> {
    train(&ClassifierSpec::new(Hyperparams::Tree(params), seed), ds)
}

pub fn train_forest(ds: &LabeledDataset, params: ForestParams, seed: u64) -> Result<TrainedModel, LearnError> {
    train(&ClassifierSpec::new(Hyperparams::Forest(params), seed), ds)
}

pub fn train_boosted(ds: &LabeledDataset, params: BoostParams, seed: u64) -> Result<TrainedModel, LearnError> {
    train(&ClassifierSpec::new(Hyperparams::Boosted(params), seed), ds)
}

pub fn train_svm_smo(ds: &LabeledDataset, params: SvmParams, seed: u64) -> Result<TrainedModel, LearnError> {
    train(&ClassifierSpec::new(Hyperparams::SvmRbf(params), seed), ds)
}

/// Boosting on `ds` returning the per-round training log-loss on scaled data.
pub fn boosting_loss_trace(ds: &LabeledDataset, params: BoostParams, seed: u64) -> Result<Vec<f64>, LearnError> {
    Hyperparams::Boosted(params).validate()?;
    if ds.is_empty() {
        return Err(LearnError::EmptyInput);
    }
    let scaler = Scaler::fit(ds.features())?;
    let x = scaler.transform(ds.features());
    Ok(boosted_fit(&x, ds.labels(), ds.n_classes(), &params, seed).1)
}

/// Per-pair SMO diagnostics on the scaled training data of `ds`:
/// `(class_a, class_b, max KKT violation, |sum alpha_i y_i|, converged)`.
pub fn svm_kkt_report(
    ds: &LabeledDataset,
    params: SvmParams,
) -> Result<Vec<(usize, usize, f64, f64, bool)>, LearnError> {
    Hyperparams::SvmRbf(params).validate()?;
    let scaler = Scaler::fit(ds.features())?;
    let x = scaler.transform(ds.features());
    let gamma = match params.gamma {
        Gamma::Scale => svm::scale_gamma(&x),
        Gamma::Value(g) => g,
    };
    let y = ds.labels();
    let k = ds.n_classes();
    let mut out = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == a || y[i] == b).collect();
            if rows.is_empty() {
                continue;
            }
            let signs: Vec<f64> = rows.iter().map(|&i| if y[i] == a { 1.0 } else { -1.0 }).collect();
            let refs: Vec<&[f64]> = rows.iter().map(|&i| x[i].as_slice()).collect();
            let kernel = svm::kernel_matrix(&refs, gamma);
            let budget = params.max_passes.saturating_mul(rows.len());
            let sol = svm::solve_binary(&kernel, &signs, params.c, params.tol, budget);
            let violation = svm::max_kkt_violation(&kernel, &signs, &sol, params.c);
            let balance: f64 = sol.alpha.iter().zip(&signs).map(|(a, s)| a * s).sum();
            out.push((a, b, violation, balance.abs(), sol.converged));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gaussian_blobs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs() -> (LabeledDataset, LabeledDataset) {
        let ds = gaussian_blobs(300, 6, 17, 1.0, 5);
        crate::dataset::train_test_split(&ds, &crate::dataset::SplitSpec::default()).unwrap()
    }

    fn accuracy(model: &TrainedModel, ds: &LabeledDataset) -> f64 {
        let pred = model.predict_labels(ds.features()).unwrap();
        pred.iter().zip(ds.labels()).filter(|(a, b)| a == b).count() as f64 / ds.len() as f64
    }

    #[test]
    fn learners_separate_blobs() {
        let (train_ds, test_ds) = blobs();
        for name in ["svm", "forest", "boosted", "logistic", "xgboost", "lightgbm"] {
            let model = train(&ClassifierSpec::new(Hyperparams::preset(name).unwrap(), 3), &train_ds).unwrap();
            assert!(accuracy(&model, &test_ds) >= 0.95, "{name}");
        }
    }

    #[test]
    fn svm_votes_sum_to_pair_count() {
        let (train_ds, test_ds) = blobs();
        let model = train_svm_smo(&train_ds, SvmParams::default(), 0).unwrap();
        for row in test_ds.features() {
            let p = model.predict(row).unwrap();
            assert_eq!(p.scores.iter().sum::<f64>(), 15.0);
        }
        if let ModelParams::SvmRbf(m) = &model.params {
            for machine in &m.machines {
                assert!(machine.dual_coef.iter().all(|a| a.abs() > 0.0 && a.abs() <= m.c));
            }
        }
    }

    #[test]
    fn logistic_scores_are_probabilities() {
        let (train_ds, test_ds) = blobs();
        let model = train_logistic(&train_ds, LogisticParams::default(), 0).unwrap();
        for row in test_ds.features() {
            assert!((model.predict(row).unwrap().scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_tree_forest_equals_tree() {
        let (train_ds, test_ds) = blobs();
        let forest = train_forest(
            &train_ds,
            ForestParams {
                n_trees: 1,
                bootstrap: false,
                features_per_split: Some(17),
                ..ForestParams::default()
            },
            9,
        )
        .unwrap();
        let tree = train_tree(&train_ds, TreeParams::default(), 9).unwrap();
        for row in test_ds.features().iter().chain(train_ds.features()) {
            assert_eq!(forest.predict(row).unwrap().class, tree.predict(row).unwrap().class);
        }
    }

    #[test]
    fn deep_tree_memorizes_training_rows() {
        let (train_ds, _) = blobs();
        let tree = train_tree(&train_ds, TreeParams::default(), 0).unwrap();
        assert_eq!(accuracy(&tree, &train_ds), 1.0);
    }

    #[test]
    fn boosting_first_round_beats_ln2() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        let ds = LabeledDataset::from_rows(x, y, vec!["a".into(), "b".into()]).unwrap();
        let trace = boosting_loss_trace(&ds, BoostParams { n_rounds: 1, ..BoostParams::default() }, 0).unwrap();
        assert!((trace[0] - 2f64.ln()).abs() < 1e-12);
        assert!(trace[1] < 2f64.ln());
    }

    #[test]
    fn boosting_loss_never_increases() {
        let (train_ds, _) = blobs();
        for params in [BoostParams::default(), BoostParams::xgboost_preset(), BoostParams::lightgbm_preset()] {
            let trace = boosting_loss_trace(&train_ds, BoostParams { n_rounds: 30, ..params }, 0).unwrap();
            assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn zero_learning_rate_predicts_priors() {
        let (train_ds, test_ds) = blobs();
        let model = train_boosted(&train_ds, BoostParams { learning_rate: 0.0, n_rounds: 5, ..BoostParams::default() }, 0).unwrap();
        let counts = train_ds.class_counts();
        let n = train_ds.len() as f64;
        for row in test_ds.features() {
            let scores = model.predict(row).unwrap().scores;
            for (s, c) in scores.iter().zip(&counts) {
                assert!((s - *c as f64 / n).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn every_learner_is_deterministic() {
        let (train_ds, _) = blobs();
        for (_, hp) in model_roster() {
            let hp = match hp {
                Hyperparams::Forest(p) => Hyperparams::Forest(ForestParams { n_trees: 20, ..p }),
                other => other,
            };
            let a = train(&ClassifierSpec::new(hp, 77), &train_ds).unwrap().to_json().unwrap();
            let b = train(&ClassifierSpec::new(hp, 77), &train_ds).unwrap().to_json().unwrap();
            assert_eq!(a, b, "{:?}", hp.kind());
        }
    }

    #[test]
    fn label_permutation_is_equivariant() {
        let (train_ds, test_ds) = blobs();
        let perm = [3usize, 0, 5, 1, 4, 2];
        let permuted = LabeledDataset::new(
            train_ds.features().to_vec(),
            train_ds.labels().iter().map(|&l| perm[l]).collect(),
            (0..6).map(|i| format!("c{i}")).collect(),
            train_ds.paths().to_vec(),
        )
        .unwrap();
        for (name, hp) in model_roster() {
            let hp = match hp {
                Hyperparams::Forest(p) => Hyperparams::Forest(ForestParams { n_trees: 25, ..p }),
                other => other,
            };
            let a = train(&ClassifierSpec::new(hp, 1), &train_ds).unwrap();
            let b = train(&ClassifierSpec::new(hp, 1), &permuted).unwrap();
            for row in test_ds.features() {
                assert_eq!(perm[a.predict(row).unwrap().class], b.predict(row).unwrap().class, "{name}");
            }
        }
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let (train_ds, _) = blobs();
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for (_, hp) in model_roster() {
            let hp = match hp {
                Hyperparams::Forest(p) => Hyperparams::Forest(ForestParams { n_trees: 10, ..p }),
                other => other,
            };
            let model = train(&ClassifierSpec::new(hp, 4), &train_ds).unwrap();
            let path = dir.path().join("m.json");
            save_model(&model, &path).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(loaded, model);
            for _ in 0..1000 {
                let x: Vec<f64> = (0..17).map(|_| rng.random_range(-15.0..15.0)).collect();
                let (p, q) = (model.predict(&x).unwrap(), loaded.predict(&x).unwrap());
                assert_eq!(p.class, q.class);
                assert_eq!(
                    p.scores.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                    q.scores.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
                );
            }
        }
    }

    #[test]
    fn corrupt_and_future_model_files() {
        let (train_ds, _) = blobs();
        let model = train_tree(&train_ds, TreeParams { max_depth: Some(3), ..TreeParams::default() }, 0).unwrap();
        let text = model.to_json().unwrap();
        assert!(matches!(
            TrainedModel::from_json(&text[..text.len() / 2]),
            Err(LearnError::CorruptModel(_))
        ));
        let future = text.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(
            TrainedModel::from_json(&future),
            Err(LearnError::SchemaVersionMismatch { found: 2, expected: 1 })
        ));
        let tampered = text.replacen("\"threshold\": ", "\"threshold\": 1", 1);
        assert!(matches!(TrainedModel::from_json(&tampered), Err(LearnError::CorruptModel(_))));
    }

    #[test]
    fn predict_validates_input() {
        let (train_ds, _) = blobs();
        let model = train_tree(&train_ds, TreeParams::default(), 0).unwrap();
        assert!(matches!(
            model.predict(&[0.0; 3]),
            Err(LearnError::DimensionMismatch { expected: 17, got: 3 })
        ));
        let mut x = vec![0.0; 17];
        x[4] = f64::NAN;
        assert!(matches!(model.predict(&x), Err(LearnError::NonFiniteInput(4))));
    }

    #[test]
    fn single_class_rejected_for_svm_and_logistic() {
        let ds = LabeledDataset::from_rows(vec![vec![1.0], vec![2.0]], vec![0, 0], vec!["a".into(), "b".into()]).unwrap();
        assert!(matches!(train_svm_smo(&ds, SvmParams::default(), 0), Err(LearnError::SingleClassInput)));
        assert!(matches!(train_logistic(&ds, LogisticParams::default(), 0), Err(LearnError::SingleClassInput)));
        assert!(train_tree(&ds, TreeParams::default(), 0).is_ok());
    }

    #[test]
    fn smo_kkt_on_blobs() {
        let (train_ds, _) = blobs();
        let params = SvmParams::default();
        for (a, b, violation, balance, converged) in svm_kkt_report(&train_ds, params).unwrap() {
            assert!(converged, "{a} vs {b}");
            assert!(violation <= params.tol, "{a} vs {b}: {violation}");
            assert!(balance <= params.tol);
        }
    }
}
