//! Labeled feature tables: IRMAS directory scanning, CSV persistence,
//! shuffled splits, k-fold construction and standardization.
//!
//! All shuffling uses `ChaCha8Rng` seeded from a caller-supplied `u64`, so a
//! given seed reproduces the same partition on every platform.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

use crate::features::{FEATURE_DIM, FEATURE_NAMES};

/// IRMAS folder codes of the six instruments, in table order.
pub const IRMAS_CLASS_CODES: [&str; 6] = ["flu", "pia", "tru", "gac", "voi", "org"];

/// Clip counts per class in the six-instrument IRMAS training subset.
pub const IRMAS_CLASS_COUNTS: [usize; 6] = [451, 721, 577, 637, 778, 682];

/// Human-readable name for an IRMAS folder code.
pub fn irmas_class_name(code: &str) -> Option<&'static str> {
    Some(match code {
        "flu" => "Flute",
        "pia" => "Piano",
        "tru" => "Trumpet",
        "gac" => "Guitar",
        "voi" => "Voice",
        "org" => "Organ",
        "cel" => "Cello",
        "cla" => "Clarinet",
        "gel" => "ElectricGuitar",
        "sax" => "Saxophone",
        "vio" => "Violin",
        _ => return None,
    })
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("class directory {0} does not exist")]
    MissingClassDir(PathBuf),
    #[error("class directory {0} contains no .wav files")]
    EmptyClassDir(PathBuf),
    #[error("degenerate split: {train} training and {test} test rows")]
    DegenerateSplit { train: usize, test: usize },
    #[error("cannot make {k} folds from {n} rows")]
    TooManyFolds { n: usize, k: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid split settings: {0}")]
    InvalidSplit(String),
    #[error("inconsistent dataset: {0}")]
    Inconsistent(String),
    #[error("non-finite feature at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("feature table is missing column `{0}`")]
    MissingColumn(String),
    #[error("feature table row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("walking {path}: {source}")]
    Walk {
        path: PathBuf,
        #[source]
        source: walkdir::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Feature matrix with integer labels and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    paths: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        paths: Vec<String>,
    ) -> Result<Self, DatasetError> {
        if features.len() != labels.len() || labels.len() != paths.len() {
            return Err(DatasetError::Inconsistent(format!(
                "{} feature rows, {} labels, {} paths",
                features.len(),
                labels.len(),
                paths.len()
            )));
        }
        if let Some(first) = features.first() {
            let dim = first.len();
            if let Some(row) = features.iter().position(|r| r.len() != dim) {
                return Err(DatasetError::Inconsistent(format!(
                    "row {row} has {} columns, expected {dim}",
                    features[row].len()
                )));
            }
        }
        for (row, values) in features.iter().enumerate() {
            if let Some(col) = values.iter().position(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite { row, col });
            }
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(DatasetError::Inconsistent(format!(
                "label {bad} has no entry among {} class names",
                class_names.len()
            )));
        }
        Ok(Self {
            features,
            labels,
            class_names,
            paths,
        })
    }

    /// Dataset without provenance; rows get synthetic `row<i>` paths.
    pub fn from_rows(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self, DatasetError> {
        let paths = (0..labels.len()).map(|i| format!("row{i}")).collect();
        Self::new(features, labels, class_names, paths)
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn paths(&self) -> &[String] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            paths: indices.iter().map(|&i| self.paths[i].clone()).collect(),
        }
    }

    /// Keeps only rows of the named classes and renumbers labels densely.
    pub fn restrict_classes(&self, keep: &[String]) -> Result<Self, DatasetError> {
        let mut remap = vec![None; self.n_classes()];
        for (new, name) in keep.iter().enumerate() {
            let old = self
                .class_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| DatasetError::Inconsistent(format!("unknown class `{name}`")))?;
            remap[old] = Some(new);
        }
        let rows: Vec<usize> = (0..self.len()).filter(|&i| remap[self.labels[i]].is_some()).collect();
        Ok(Self {
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            labels: rows.iter().map(|&i| remap[self.labels[i]].unwrap()).collect(),
            class_names: keep.to_vec(),
            paths: rows.iter().map(|&i| self.paths[i].clone()).collect(),
        })
    }

    /// Same rows with features replaced (used after scaling).
    pub fn with_features(&self, features: Vec<Vec<f64>>) -> Result<Self, DatasetError> {
        Self::new(
            features,
            self.labels.clone(),
            self.class_names.clone(),
            self.paths.clone(),
        )
    }

    /// SHA-256 over class names, labels and the bit patterns of every feature.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.class_names {
            h.update(name.as_bytes());
            h.update([0u8]);
        }
        for (row, &label) in self.features.iter().zip(&self.labels) {
            h.update((label as u64).to_le_bytes());
            for v in row {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Lists `<root>/<class>/**/*.wav` for each class, paired with the class index.
///
/// Files are sorted by full path within each class, so the order depends only
/// on the directory contents.
pub fn scan_instrument_dirs(
    root: &Path,
    class_codes: &[String],
) -> Result<Vec<(PathBuf, usize)>, DatasetError> {
    let mut out = Vec::new();
    for (label, code) in class_codes.iter().enumerate() {
        let dir = root.join(code);
        if !dir.is_dir() {
            return Err(DatasetError::MissingClassDir(dir));
        }
        let mut files = Vec::new();
        for entry in WalkDir::new(&dir).sort_by_file_name() {
            let entry = entry.map_err(|source| DatasetError::Walk {
                path: dir.clone(),
                source,
            })?;
            let is_wav = entry
                .path()
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"));
            if entry.file_type().is_file() && is_wav {
                files.push(entry.into_path());
            }
        }
        if files.is_empty() {
            return Err(DatasetError::EmptyClassDir(dir));
        }
        files.sort();
        out.extend(files.into_iter().map(|p| (p, label)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub folds: usize,
    pub seed: u64,
    /// Split each class separately instead of the pooled rows.
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            folds: 10,
            seed: 42,
            stratified: false,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(DatasetError::InvalidSplit(format!(
                "test fraction {} must lie strictly between 0 and 1",
                self.test_fraction
            )));
        }
        if self.folds < 2 {
            return Err(DatasetError::InvalidSplit(format!(
                "{} folds (need at least 2)",
                self.folds
            )));
        }
        Ok(())
    }
}

fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

fn test_count(n: usize, fraction: f64) -> usize {
    // tolerance keeps products like 0.2 * 10 from rounding up to 3
    ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Shuffled `(train, test)` row indices; the test side gets `ceil(f * n)` rows.
pub fn split_indices(
    labels: &[usize],
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    spec.validate()?;
    let n = labels.len();
    if n == 0 {
        return Err(DatasetError::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    if spec.stratified {
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        for class in 0..n_classes {
            let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
            members.shuffle(&mut rng);
            let k = test_count(members.len(), spec.test_fraction);
            test.extend_from_slice(&members[..k]);
            train.extend_from_slice(&members[k..]);
        }
    } else {
        let order = shuffled(n, &mut rng);
        let k = test_count(n, spec.test_fraction);
        test.extend_from_slice(&order[..k]);
        train.extend_from_slice(&order[k..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(DatasetError::DegenerateSplit {
            train: train.len(),
            test: test.len(),
        });
    }
    Ok((train, test))
}

pub fn train_test_split(
    ds: &LabeledDataset,
    spec: &SplitSpec,
) -> Result<(LabeledDataset, LabeledDataset), DatasetError> {
    let (train, test) = split_indices(ds.labels(), spec)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

/// Shuffled indices dealt into `k` contiguous folds whose sizes differ by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, DatasetError> {
    if k < 2 {
        return Err(DatasetError::InvalidSplit(format!("{k} folds (need at least 2)")));
    }
    if k > n {
        return Err(DatasetError::TooManyFolds { n, k });
    }
    let order = shuffled(n, &mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

/// Column-wise standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stdevs: Vec<f64>,
}

impl Scaler {
    /// Population mean and standard deviation per column; zero-variance columns get 1.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, DatasetError> {
        let first = rows.first().ok_or(DatasetError::EmptyInput)?;
        let n = rows.len() as f64;
        let dim = first.len();
        let mut means = vec![0.0; dim];
        for row in rows {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stdevs = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in stdevs.iter_mut().zip(row).zip(&means) {
                *s += (v - m).powi(2);
            }
        }
        for s in &mut stdevs {
            *s = (*s / n).sqrt();
            if !(*s > 0.0) || !s.is_finite() {
                *s = 1.0;
            }
        }
        Ok(Self { means, stdevs })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            stdevs: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stdevs))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stdevs))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

pub fn fit_scaler(train: &[Vec<f64>]) -> Result<Scaler, DatasetError> {
    Scaler::fit(train)
}

pub fn apply_scaler(scaler: &Scaler, features: &[Vec<f64>]) -> Vec<Vec<f64>> {
    scaler.transform(features)
}

/// Writes the feature table.
///
/// `comments` are emitted first as `# ` lines. A `# class_names=` line records
/// the label order so that reading the table back reproduces label indices.
pub fn write_feature_csv<W: Write>(
    mut out: W,
    ds: &LabeledDataset,
    comments: &[String],
) -> Result<(), DatasetError> {
    if ds.n_features() != FEATURE_DIM && !ds.is_empty() {
        return Err(DatasetError::Inconsistent(format!(
            "feature table needs {FEATURE_DIM} columns, dataset has {}",
            ds.n_features()
        )));
    }
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "# class_names={}", ds.class_names().join(";"))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["path", "label"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut record = vec![ds.paths[i].clone(), ds.class_names[ds.labels[i]].clone()];
        record.extend(ds.features[i].iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_feature_csv`].
///
/// Without a `# class_names=` line, classes are numbered in order of first
/// appearance.
pub fn read_feature_csv<R: Read>(mut input: R) -> Result<LabeledDataset, DatasetError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut class_names: Vec<String> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.trim_start_matches('#').trim().strip_prefix("class_names="))
        .map(|names| {
            names
                .split(';')
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
                .collect()
        })
        .unwrap_or_default();

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_owned()))
    };
    let path_col = column("path")?;
    let label_col = column("label")?;
    let feature_cols = FEATURE_NAMES
        .iter()
        .map(|name| column(name))
        .collect::<Result<Vec<_>, _>>()?;

    let (mut features, mut labels, mut paths) = (Vec::new(), Vec::new(), Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = |col: usize| {
            record.get(col).ok_or_else(|| DatasetError::BadRow {
                row,
                message: format!("missing field {col}"),
            })
        };
        let label_name = field(label_col)?;
        let label = match class_names.iter().position(|c| c == label_name) {
            Some(l) => l,
            None => {
                class_names.push(label_name.to_owned());
                class_names.len() - 1
            }
        };
        let values = feature_cols
            .iter()
            .map(|&c| {
                let raw = field(c)?;
                raw.parse::<f64>().map_err(|e| DatasetError::BadRow {
                    row,
                    message: format!("column `{}` value {raw:?}: {e}", &headers[c]),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        paths.push(field(path_col)?.to_owned());
        labels.push(label);
        features.push(values);
    }
    LabeledDataset::new(features, labels, class_names, paths)
}

pub fn load_feature_csv(path: &Path) -> Result<LabeledDataset, DatasetError> {
    read_feature_csv(std::fs::File::open(path)?)
}
