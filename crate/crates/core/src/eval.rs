//! Confusion matrices, per-class precision / recall / F1, accuracy,
//! k-fold cross-validation and the report tables built from them.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{kfold_indices, DatasetError, LabeledDataset, Scaler};
use crate::learn::{train, ClassifierSpec, LearnError, TrainedModel};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{actual} actual labels but {predicted} predictions")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("label {label} is outside 0..{n_classes}")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("confusion matrix holds no samples")]
    EmptyMatrix,
    #[error("nothing to report")]
    EmptyInput,
    #[error("cross-validation needs at least 2 folds, got {0}")]
    InvalidFolds(usize),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }
}

pub fn confusion(actual: &[usize], predicted: &[usize], n_classes: usize) -> Result<ConfusionMatrix, EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&a, &p) in actual.iter().zip(predicted) {
        for label in [a, p] {
            if label >= n_classes {
                return Err(EvalError::LabelOutOfRange { label, n_classes });
            }
        }
        counts[a][p] += 1;
    }
    Ok(ConfusionMatrix {
        counts,
        class_names: (0..n_classes).map(|c| c.to_string()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerClassMetrics {
    pub classes: Vec<ClassMetrics>,
    /// How many 0/0 ratios were reported as 0.
    pub zero_division_warnings: usize,
}

fn ratio(num: f64, den: f64, warnings: &mut usize) -> f64 {
    if den == 0.0 {
        *warnings += 1;
        0.0
    } else {
        num / den
    }
}

pub fn precision_recall_f1(cm: &ConfusionMatrix) -> PerClassMetrics {
    let mut warnings = 0;
    let classes = (0..cm.n_classes())
        .map(|c| {
            let tp = cm.counts[c][c] as f64;
            let precision = ratio(tp, cm.col_sum(c) as f64, &mut warnings);
            let recall = ratio(tp, cm.row_sum(c) as f64, &mut warnings);
            let f1 = ratio(2.0 * precision * recall, precision + recall, &mut warnings);
            ClassMetrics { precision, recall, f1 }
        })
        .collect();
    if warnings > 0 {
        log::warn!("{warnings} undefined precision/recall/F1 ratios reported as 0");
    }
    PerClassMetrics {
        classes,
        zero_division_warnings: warnings,
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    match cm.total() {
        0 => Err(EvalError::EmptyMatrix),
        total => Ok(cm.trace() as f64 / total as f64),
    }
}

/// Pooled tp / (tp + fp) over all classes.
pub fn micro_precision(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let predicted: u64 = (0..cm.n_classes()).map(|c| cm.col_sum(c)).sum();
    if predicted == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    Ok(cm.trace() as f64 / predicted as f64)
}

/// Pooled tp / (tp + fn) over all classes.
pub fn micro_recall(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let actual: u64 = (0..cm.n_classes()).map(|c| cm.row_sum(c)).sum();
    if actual == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    Ok(cm.trace() as f64 / actual as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub zero_division_warnings: usize,
}

impl EvalReport {
    pub fn from_predictions(
        model: &str,
        actual: &[usize],
        predicted: &[usize],
        class_names: &[String],
    ) -> Result<Self, EvalError> {
        let mut cm = confusion(actual, predicted, class_names.len())?;
        cm.class_names = class_names.to_vec();
        let metrics = precision_recall_f1(&cm);
        Ok(Self {
            model: model.to_string(),
            accuracy: accuracy(&cm)?,
            per_class: metrics.classes,
            zero_division_warnings: metrics.zero_division_warnings,
            confusion: cm,
        })
    }

    /// Per-class table in the layout `class  precision  recall  f1`.
    pub fn render_table(&self) -> String {
        let width = self.confusion.class_names.iter().map(String::len).max().unwrap_or(5).max(8);
        let mut out = format!("{:<width$}  precision  recall  f1-score\n", self.model);
        for (name, m) in self.confusion.class_names.iter().zip(&self.per_class) {
            out.push_str(&format!("{name:<width$}  {:>9.4}  {:>6.4}  {:>8.4}\n", m.precision, m.recall, m.f1));
        }
        out.push_str(&format!("{:<width$}  {:>9}  {:>6}  {:>8.4}\n", "accuracy", "", "", self.accuracy));
        out
    }
}

pub fn evaluate_model(model_name: &str, model: &TrainedModel, test: &LabeledDataset) -> Result<EvalReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let predicted = model.predict_labels(test.features())?;
    EvalReport::from_predictions(model_name, test.labels(), &predicted, model.class_names.as_slice())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the fold accuracies.
    pub stdev: f64,
    /// Held-out row indices per fold.
    pub test_indices: Vec<Vec<usize>>,
    /// Scaler fitted inside each fold.
    pub scalers: Vec<Scaler>,
}

/// Each fold trains scaler and model on the other folds only, in parallel.
pub fn cross_validate(
    spec: &ClassifierSpec,
    ds: &LabeledDataset,
    folds: usize,
    seed: u64,
) -> Result<CvResult, EvalError> {
    if folds < 2 {
        return Err(EvalError::InvalidFolds(folds));
    }
    let test_indices = kfold_indices(ds.len(), folds, seed)?;
    let outcomes: Vec<Result<(f64, Scaler), EvalError>> = test_indices
        .par_iter()
        .map(|held_out| {
            let mut in_test = vec![false; ds.len()];
            held_out.iter().for_each(|&i| in_test[i] = true);
            let train_rows: Vec<usize> = (0..ds.len()).filter(|&i| !in_test[i]).collect();
            let model = train(spec, &ds.subset(&train_rows))?;
            let report = evaluate_model("fold", &model, &ds.subset(held_out))?;
            Ok((report.accuracy, model.scaler))
        })
        .collect();
    let mut fold_accuracies = Vec::with_capacity(folds);
    let mut scalers = Vec::with_capacity(folds);
    for outcome in outcomes {
        let (acc, scaler) = outcome?;
        fold_accuracies.push(acc);
        scalers.push(scaler);
    }
    let mean = fold_accuracies.iter().sum::<f64>() / folds as f64;
    let stdev = (fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / folds as f64).sqrt();
    Ok(CvResult {
        fold_accuracies,
        mean,
        stdev,
        test_indices,
        scalers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Precision,
    Recall,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Precision, Metric::Recall, Metric::F1];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::F1 => "f1",
        }
    }

    fn of(self, m: &ClassMetrics) -> f64 {
        match self {
            Metric::Precision => m.precision,
            Metric::Recall => m.recall,
            Metric::F1 => m.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// One row per (model, class).
pub fn metric_table(reports: &[EvalReport]) -> Result<Vec<MetricRow>, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(reports
        .iter()
        .flat_map(|r| {
            r.confusion.class_names.iter().zip(&r.per_class).map(|(class, m)| MetricRow {
                model: r.model.clone(),
                class: class.clone(),
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Most extreme values inside `[q1 - 1.5 IQR, q3 + 1.5 IQR]`.
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

/// Quantile by linear interpolation between order statistics of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| (lo_fence..=hi_fence).contains(x)).collect();
    Some(BoxStats {
        min: v[0],
        q1,
        median,
        q3,
        max: v[v.len() - 1],
        lower_whisker: inside[0],
        upper_whisker: inside[inside.len() - 1],
        outliers: v.iter().copied().filter(|x| !(lo_fence..=hi_fence).contains(x)).collect(),
    })
}

/// Box-plot statistics of one metric across the classes of each model.
pub fn boxplot_rows(reports: &[EvalReport], metric: Metric) -> Vec<(String, BoxStats)> {
    reports
        .iter()
        .filter_map(|r| {
            let values: Vec<f64> = r.per_class.iter().map(|m| metric.of(m)).collect();
            box_stats(&values).map(|b| (r.model.clone(), b))
        })
        .collect()
}

fn write_comments<W: Write>(out: &mut W, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    Ok(())
}

pub fn write_per_class_metrics_csv<W: Write>(mut out: W, reports: &[EvalReport], comments: &[String]) -> Result<(), EvalError> {
    write_comments(&mut out, comments)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "class", "precision", "recall", "f1"])?;
    for row in metric_table(reports)? {
        w.write_record([row.model, row.class, row.precision.to_string(), row.recall.to_string(), row.f1.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_model_accuracy_csv<W: Write>(mut out: W, reports: &[EvalReport], comments: &[String]) -> Result<(), EvalError> {
    write_comments(&mut out, comments)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "accuracy"])?;
    for r in reports {
        w.write_record([r.model.clone(), r.accuracy.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_confusion_csv<W: Write>(mut out: W, cm: &ConfusionMatrix, comments: &[String]) -> Result<(), EvalError> {
    write_comments(&mut out, comments)?;
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = std::iter::once("actual\\predicted".to_string())
        .chain(cm.class_names.iter().cloned())
        .collect();
    w.write_record(&header)?;
    for (name, row) in cm.class_names.iter().zip(&cm.counts) {
        let record: Vec<String> = std::iter::once(name.clone()).chain(row.iter().map(u64::to_string)).collect();
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_boxplot_csv<W: Write>(
    mut out: W,
    reports: &[EvalReport],
    metric: Metric,
    comments: &[String],
) -> Result<(), EvalError> {
    write_comments(&mut out, comments)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model", "min", "lower_whisker", "q1", "median", "q3", "upper_whisker", "max", "outliers",
    ])?;
    for (model, b) in boxplot_rows(reports, metric) {
        let outliers: Vec<String> = b.outliers.iter().map(f64::to_string).collect();
        w.write_record([
            model,
            b.min.to_string(),
            b.lower_whisker.to_string(),
            b.q1.to_string(),
            b.median.to_string(),
            b.q3.to_string(),
            b.upper_whisker.to_string(),
            b.max.to_string(),
            outliers.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// File-name-safe form of a model name, e.g. `"XG Boost"` → `xg_boost`.
pub fn file_stem(model: &str) -> String {
    model
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect()
}
