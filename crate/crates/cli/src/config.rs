//! Resolution of flags, config file and built-in defaults into explicit
//! settings, plus the `key = value` rendering echoed before every run.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use timbre_core::cluster::Linkage;
use timbre_core::dataset::{SplitSpec, IRMAS_CLASS_CODES};
use timbre_core::features::ExtractionConfig;
use timbre_core::learn::{Gamma, Hyperparams};
use timbre_core::spectral::FramePlan;

use crate::args::{ClusterOpts, ExtractionOpts, FileConfig, GammaArg, GlobalArgs, ModelOpts, SplitOpts};
use crate::error::CliError;

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Field-wise `flag.or(file)`.
pub trait Overlay {
    fn overlay(self, file: &Self) -> Self;
}

macro_rules! overlay_fields {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl Overlay for $ty {
            fn overlay(self, file: &Self) -> Self {
                Self { $($field: self.$field.or_else(|| file.$field.clone()),)* }
            }
        }
    };
}

overlay_fields!(ExtractionOpts { frame_size, hop_size, centered, n_mels, rolloff_fraction, log_floor, classes });
overlay_fields!(SplitOpts { test_fraction, folds, stratified });
overlay_fields!(ModelOpts {
    kind, c, gamma, tol, max_passes, n_trees, max_depth, min_leaf, features_per_split, bootstrap, rounds,
    learning_rate, tree_depth, l2, epochs,
});
overlay_fields!(ClusterOpts { method, k, cut, linkage, n_init, max_iter, classes });

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Serialize)]
pub struct Globals {
    pub seed: u64,
    pub jobs: usize,
    pub verbose: bool,
}

pub fn resolve_globals(flags: &GlobalArgs, file: &FileConfig) -> Result<Globals, CliError> {
    let jobs = flags
        .jobs
        .or(file.jobs)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from));
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    Ok(Globals {
        seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        jobs,
        verbose: flags.verbose || file.verbose.unwrap_or(false),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtractionSettings {
    pub frame_size: usize,
    pub hop_size: usize,
    pub centered: bool,
    pub n_mels: usize,
    pub rolloff_fraction: f64,
    pub log_floor: f64,
    pub classes: Vec<String>,
}

impl ExtractionSettings {
    pub fn resolve(opts: &ExtractionOpts) -> Result<Self, CliError> {
        let d = ExtractionConfig::default();
        let settings = Self {
            frame_size: opts.frame_size.unwrap_or(d.frame_plan.frame_size()),
            hop_size: opts.hop_size.unwrap_or(d.frame_plan.hop_size()),
            centered: opts.centered.unwrap_or(d.frame_plan.centered()),
            n_mels: opts.n_mels.unwrap_or(d.n_mels),
            rolloff_fraction: opts.rolloff_fraction.unwrap_or(d.rolloff_fraction),
            log_floor: opts.log_floor.unwrap_or(d.log_floor),
            classes: opts
                .classes
                .clone()
                .unwrap_or_else(|| IRMAS_CLASS_CODES.iter().map(|c| c.to_string()).collect()),
        };
        settings.config()?;
        Ok(settings)
    }

    pub fn frame_plan(&self) -> Result<FramePlan, CliError> {
        FramePlan::new(self.frame_size, self.hop_size, self.centered).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn config(&self) -> Result<ExtractionConfig, CliError> {
        let cfg = ExtractionConfig {
            frame_plan: self.frame_plan()?,
            n_mels: self.n_mels,
            rolloff_fraction: self.rolloff_fraction,
            log_floor: self.log_floor,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

pub fn resolve_split(opts: &SplitOpts, seed: u64) -> Result<SplitSpec, CliError> {
    let d = SplitSpec::default();
    let spec = SplitSpec {
        test_fraction: opts.test_fraction.unwrap_or(d.test_fraction),
        folds: opts.folds.unwrap_or(d.folds),
        seed,
        stratified: opts.stratified.unwrap_or(d.stratified),
    };
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(spec)
}

pub const DEFAULT_MODEL: &str = "svm";

/// The preset named by `--model` (default SVM) with any overrides applied.
pub fn resolve_model(opts: &ModelOpts) -> Result<(String, Hyperparams), CliError> {
    let name = opts.kind.clone().unwrap_or_else(|| DEFAULT_MODEL.to_string());
    let preset = Hyperparams::preset(&name).ok_or_else(|| CliError::Config(format!("unknown model `{name}`")))?;
    Ok((name, apply_model_overrides(preset, opts)?))
}

/// Applies the overrides that concern `hp`'s kind; the rest are ignored.
pub fn apply_model_overrides(hp: Hyperparams, o: &ModelOpts) -> Result<Hyperparams, CliError> {
    let hp = match hp {
        Hyperparams::Logistic(mut p) => {
            p.l2 = o.l2.unwrap_or(p.l2);
            p.learning_rate = o.learning_rate.unwrap_or(p.learning_rate);
            p.epochs = o.epochs.unwrap_or(p.epochs);
            p.tol = o.tol.unwrap_or(p.tol);
            Hyperparams::Logistic(p)
        }
        Hyperparams::Tree(mut p) => {
            p.max_depth = o.max_depth.or(p.max_depth);
            p.min_leaf = o.min_leaf.unwrap_or(p.min_leaf);
            Hyperparams::Tree(p)
        }
        Hyperparams::Forest(mut p) => {
            p.n_trees = o.n_trees.unwrap_or(p.n_trees);
            p.max_depth = o.max_depth.or(p.max_depth);
            p.min_leaf = o.min_leaf.unwrap_or(p.min_leaf);
            p.features_per_split = o.features_per_split.or(p.features_per_split);
            p.bootstrap = o.bootstrap.unwrap_or(p.bootstrap);
            Hyperparams::Forest(p)
        }
        Hyperparams::Boosted(mut p) => {
            p.n_rounds = o.rounds.unwrap_or(p.n_rounds);
            p.learning_rate = o.learning_rate.unwrap_or(p.learning_rate);
            p.tree_depth = o.tree_depth.unwrap_or(p.tree_depth);
            p.min_leaf = o.min_leaf.unwrap_or(p.min_leaf);
            Hyperparams::Boosted(p)
        }
        Hyperparams::SvmRbf(mut p) => {
            p.c = o.c.unwrap_or(p.c);
            p.tol = o.tol.unwrap_or(p.tol);
            p.max_passes = o.max_passes.unwrap_or(p.max_passes);
            p.gamma = match &o.gamma {
                None => p.gamma,
                Some(GammaArg::Value(v)) => Gamma::Value(*v),
                Some(GammaArg::Word(w)) if w == "scale" => Gamma::Scale,
                Some(GammaArg::Word(w)) => return Err(CliError::Config(format!("gamma must be `scale` or a number, got `{w}`"))),
            };
            Hyperparams::SvmRbf(p)
        }
    };
    hp.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(hp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMethod {
    Kmeans,
    Hier,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterSettings {
    pub method: ClusterMethod,
    /// `None` means one cluster per class present.
    pub k: Option<usize>,
    pub cut: usize,
    pub linkage: Linkage,
    pub n_init: usize,
    pub max_iter: usize,
    pub classes: Option<Vec<String>>,
}

pub const DEFAULT_CUT: usize = 30;

impl ClusterSettings {
    pub fn resolve(o: &ClusterOpts) -> Result<Self, CliError> {
        let method = match o.method.as_deref().unwrap_or("hier") {
            "kmeans" => ClusterMethod::Kmeans,
            "hier" | "hierarchical" => ClusterMethod::Hier,
            other => return Err(CliError::Config(format!("unknown clustering method `{other}`"))),
        };
        let linkage = o.linkage.as_deref().unwrap_or("ward").parse().map_err(|e: timbre_core::cluster::ClusterError| CliError::Config(e.to_string()))?;
        Ok(Self {
            method,
            k: o.k,
            cut: o.cut.unwrap_or(DEFAULT_CUT),
            linkage,
            n_init: o.n_init.unwrap_or(10),
            max_iter: o.max_iter.unwrap_or(300),
            classes: o.classes.clone(),
        })
    }
}

/// Flattens nested settings into sorted `a.b = value` lines.
pub fn render_lines(value: &Value) -> Vec<String> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<String>) {
        match v {
            Value::Object(map) => {
                for (k, child) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, child, out);
                }
            }
            leaf => out.push(format!("{prefix} = {leaf}")),
        }
    }
    let mut out = Vec::new();
    walk("", value, &mut out);
    out
}

/// The resolved configuration of one run.
pub struct RunConfig {
    value: Value,
}

impl RunConfig {
    pub fn new(command: &str, globals: &Globals, sections: Value) -> Self {
        let mut value = json!({
            "command": command,
            "seed": globals.seed,
            "jobs": globals.jobs,
            "verbose": globals.verbose,
        });
        if let (Value::Object(base), Value::Object(extra)) = (&mut value, sections) {
            base.extend(extra);
        }
        Self { value }
    }

    /// Every setting, for the console.
    pub fn lines(&self) -> Vec<String> {
        render_lines(&self.value)
    }

    /// Settings that can influence output files; thread count and verbosity
    /// are left out so outputs do not depend on the machine.
    pub fn output_lines(&self) -> Vec<String> {
        let mut v = self.value.clone();
        if let Value::Object(map) = &mut v {
            map.remove("jobs");
            map.remove("verbose");
        }
        render_lines(&v)
    }

    pub fn print(&self) {
        for line in self.lines() {
            println!("# {line}");
        }
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("settings serialize to JSON")
}
