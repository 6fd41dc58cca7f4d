//! Command-line flags. Every option group doubles as a section of the TOML
//! config file, so one struct describes both sources.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

#[derive(Debug, Parser)]
#[command(name = "timbre", version, about = "Instrument clip features, classifiers and clustering")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for every random choice (splits, folds, forests, k-means).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Debug-level logging.
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract one feature row per clip from an instrument folder tree.
    Extract(ExtractArgs),
    /// Train one model on the training split and report holdout metrics.
    Train(TrainArgs),
    /// Train the six-model roster and write every report table.
    Evaluate(EvaluateArgs),
    /// k-fold cross-validated accuracy of one model.
    Crossval(CrossvalArgs),
    /// Classify a WAV file with a saved model.
    Predict(PredictArgs),
    /// k-means or hierarchical clustering of a feature table.
    Cluster(ClusterArgs),
    /// Render a clip's power spectrogram as a grayscale image.
    Spectrogram(SpectrogramArgs),
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionOpts {
    #[arg(long)]
    pub frame_size: Option<usize>,
    #[arg(long)]
    pub hop_size: Option<usize>,
    /// Reflect-pad so frame `t` is centered on sample `t * hop`.
    #[arg(long)]
    pub centered: Option<bool>,
    #[arg(long)]
    pub n_mels: Option<usize>,
    #[arg(long)]
    pub rolloff_fraction: Option<f64>,
    #[arg(long)]
    pub log_floor: Option<f64>,
    /// Class folder codes, in label order.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub classes: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitOpts {
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub stratified: Option<bool>,
}

/// `scale` or a positive number.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GammaArg {
    Value(f64),
    Word(String),
}

impl FromStr for GammaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "scale" {
            return Ok(GammaArg::Word(s.into()));
        }
        s.parse::<f64>()
            .map(GammaArg::Value)
            .map_err(|_| format!("gamma must be `scale` or a number, got `{s}`"))
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelOpts {
    /// logistic, tree, forest, boosted, xgboost, lightgbm or svm.
    #[arg(long = "model")]
    pub kind: Option<String>,
    /// SVM box constraint.
    #[arg(long)]
    pub c: Option<f64>,
    /// SVM RBF width: `scale` or a number.
    #[arg(long)]
    pub gamma: Option<GammaArg>,
    /// SVM KKT tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_passes: Option<usize>,
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long)]
    pub features_per_split: Option<usize>,
    #[arg(long)]
    pub bootstrap: Option<bool>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub tree_depth: Option<usize>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterOpts {
    /// `kmeans` or `hier`.
    #[arg(long)]
    pub method: Option<String>,
    /// Number of k-means clusters; defaults to the number of classes.
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of clusters kept when cutting the dendrogram.
    #[arg(long)]
    pub cut: Option<usize>,
    /// ward, average, complete or single.
    #[arg(long)]
    pub linkage: Option<String>,
    #[arg(long)]
    pub n_init: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Restrict clustering to these class names.
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Folder holding one sub-folder of WAV clips per class.
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub extraction: ExtractionOpts,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Where to write the model JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelOpts,
    #[command(flatten)]
    pub split: SplitOpts,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Subset of the roster (logistic, tree, lightgbm, xgboost, forest, svm).
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[command(flatten)]
    pub model: ModelOpts,
    #[command(flatten)]
    pub split: SplitOpts,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Optional CSV of per-fold accuracies.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelOpts,
    #[command(flatten)]
    pub split: SplitOpts,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model JSON written by `train`.
    #[arg(long = "model")]
    pub model_path: PathBuf,
    #[arg(long)]
    pub wav: PathBuf,
    #[command(flatten)]
    pub extraction: ExtractionOpts,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Assignment CSV (`path,label,cluster`).
    #[arg(long)]
    pub out: PathBuf,
    /// Dendrogram CSV for hierarchical runs.
    #[arg(long)]
    pub dendrogram: Option<PathBuf>,
    #[command(flatten)]
    pub cluster: ClusterOpts,
}

#[derive(Debug, Args)]
pub struct SpectrogramArgs {
    #[arg(long)]
    pub wav: PathBuf,
    /// Output image (binary PGM).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub extraction: ExtractionOpts,
}

/// Contents of `--config`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub verbose: Option<bool>,
    pub extraction: ExtractionOpts,
    pub split: SplitOpts,
    pub model: ModelOpts,
    pub cluster: ClusterOpts,
}
