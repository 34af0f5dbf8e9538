//! Evaluation artifacts: confusion matrices, per-class precision/recall/F1,
//! one-vs-rest ROC curves, feature correlations and histograms, and writers
//! that dump them as CSV/JSON for external plotting.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recommender::{predict_proba, CropClass, LabeledDataset, RecommendationModel};
use crate::twin::{FeatureVector, FEATURE_NAMES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("{preds} predictions but {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("class index {0} out of range")]
    ClassOutOfRange(usize),
    #[error("invalid scores: {0}")]
    InvalidScores(String),
    #[error("class `{0}` has no positive or no negative samples")]
    DegenerateClass(String),
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("no data to bin")]
    EmptyData,
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("i/o error: {0}")]
    Io(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> AnalyticsError {
    AnalyticsError::Io(format!("{}: {e}", path.display()))
}

fn crop_labels() -> Vec<String> {
    CropClass::ALL.iter().map(|c| c.label().to_string()).collect()
}

// ---------------------------------------------------------------------------
// Confusion matrix and classification report
// ---------------------------------------------------------------------------

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_indices(
        labels: Vec<String>,
        preds: &[usize],
        truth: &[usize],
    ) -> Result<Self, AnalyticsError> {
        if preds.len() != truth.len() {
            return Err(AnalyticsError::LengthMismatch { preds: preds.len(), labels: truth.len() });
        }
        if preds.is_empty() {
            return Err(AnalyticsError::Empty);
        }
        let n = labels.len();
        let mut counts = vec![vec![0; n]; n];
        for (&p, &t) in preds.iter().zip(truth) {
            if p >= n || t >= n {
                return Err(AnalyticsError::ClassOutOfRange(p.max(t)));
            }
            counts[t][p] += 1;
        }
        Ok(Self { labels, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }
}

pub fn confusion(preds: &[CropClass], labels: &[CropClass]) -> Result<ConfusionMatrix, AnalyticsError> {
    let p: Vec<usize> = preds.iter().map(|c| c.index()).collect();
    let t: Vec<usize> = labels.iter().map(|c| c.index()).collect();
    ConfusionMatrix::from_indices(crop_labels(), &p, &t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Some metric had a zero denominator and was reported as 0.
    pub zero_division: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: Averages,
    pub weighted_avg: Averages,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Per-class metrics plus accuracy and macro/weighted averages. Macro
/// averages run over classes that occur as a label or a prediction.
pub fn classification_report(cm: &ConfusionMatrix) -> Result<EvaluationReport, AnalyticsError> {
    let n = cm.n_classes();
    let total = cm.total();
    if total == 0 {
        return Err(AnalyticsError::Empty);
    }
    let mut classes = Vec::with_capacity(n);
    let mut present = Vec::with_capacity(n);
    for c in 0..n {
        let tp = cm.counts[c][c];
        let support: u64 = cm.counts[c].iter().sum();
        let predicted: u64 = (0..n).map(|r| cm.counts[r][c]).sum();
        let (precision, p0) = ratio(tp, predicted);
        let (recall, r0) = ratio(tp, support);
        classes.push(ClassMetrics {
            label: cm.labels[c].clone(),
            precision,
            recall,
            f1: f1_score(precision, recall),
            support,
            zero_division: p0 || r0,
        });
        present.push(support > 0 || predicted > 0);
    }

    let k = present.iter().filter(|&&p| p).count() as f64;
    let macro_mean = |f: fn(&ClassMetrics) -> f64| {
        classes.iter().zip(&present).filter(|(_, &p)| p).map(|(m, _)| f(m)).sum::<f64>() / k
    };
    let weighted_mean = |f: fn(&ClassMetrics) -> f64| {
        classes.iter().map(|m| m.support as f64 * f(m)).sum::<f64>() / total as f64
    };
    Ok(EvaluationReport {
        accuracy: cm.correct() as f64 / total as f64,
        macro_avg: Averages {
            precision: macro_mean(|m| m.precision),
            recall: macro_mean(|m| m.recall),
            f1: macro_mean(|m| m.f1),
            support: total,
        },
        weighted_avg: Averages {
            precision: weighted_mean(|m| m.precision),
            recall: weighted_mean(|m| m.recall),
            f1: weighted_mean(|m| m.f1),
            support: total,
        },
        classes,
        total,
    })
}

impl EvaluationReport {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.label == label)
    }

    /// Fixed-width table, metrics rounded to two decimals.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ =
            writeln!(out, "{:<14}{:>10}{:>10}{:>10}{:>10}", "", "precision", "recall", "f1-score", "support");
        let _ = writeln!(out);
        for c in &self.classes {
            let _ = writeln!(
                out,
                "{:<14}{:>10.2}{:>10.2}{:>10.2}{:>10}",
                c.label, c.precision, c.recall, c.f1, c.support
            );
        }
        let _ = writeln!(out);
        let _ =
            writeln!(out, "{:<14}{:>10}{:>10}{:>10.2}{:>10}", "accuracy", "", "", self.accuracy, self.total);
        for (name, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            let _ = writeln!(
                out,
                "{:<14}{:>10.2}{:>10.2}{:>10.2}{:>10}",
                name, a.precision, a.recall, a.f1, a.support
            );
        }
        out
    }
}

// ---------------------------------------------------------------------------
// ROC
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Score at or above which samples are called positive; `None` for the
    /// initial (0, 0) point.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Exact threshold sweep over the distinct scores, AUC by the trapezoid rule.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<RocCurve, AnalyticsError> {
    if scores.len() != positive.len() {
        return Err(AnalyticsError::LengthMismatch { preds: scores.len(), labels: positive.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(AnalyticsError::InvalidScores("NaN score".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(AnalyticsError::DegenerateClass(String::new()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: None }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold: Some(s),
        });
    }
    let auc = points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0).sum();
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRoc {
    pub label: String,
    /// `None` when the class is absent from the labels (AUC undefined).
    pub curve: Option<RocCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSet {
    pub classes: Vec<ClassRoc>,
}

impl RocSet {
    pub fn auc(&self, label: &str) -> Option<f64> {
        self.classes.iter().find(|c| c.label == label)?.curve.as_ref().map(|c| c.auc)
    }

    pub fn missing(&self) -> Vec<&str> {
        self.classes.iter().filter(|c| c.curve.is_none()).map(|c| c.label.as_str()).collect()
    }
}

/// Tolerance on each score row summing to one.
pub const SCORE_SUM_TOLERANCE: f64 = 1e-6;

/// One-vs-rest curves for every class. Rows of `scores` are per-sample
/// probability vectors.
pub fn roc_ovr(labels: Vec<String>, scores: &[Vec<f64>], truth: &[usize]) -> Result<RocSet, AnalyticsError> {
    if scores.len() != truth.len() {
        return Err(AnalyticsError::LengthMismatch { preds: scores.len(), labels: truth.len() });
    }
    if scores.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let n = labels.len();
    for (i, row) in scores.iter().enumerate() {
        if row.len() != n {
            return Err(AnalyticsError::InvalidScores(format!("row {i} has {} entries", row.len())));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > SCORE_SUM_TOLERANCE {
            return Err(AnalyticsError::InvalidScores(format!("row {i} sums to {sum}")));
        }
    }
    if let Some(&t) = truth.iter().find(|&&t| t >= n) {
        return Err(AnalyticsError::ClassOutOfRange(t));
    }
    let classes = labels
        .into_iter()
        .enumerate()
        .map(|(c, label)| {
            let col: Vec<f64> = scores.iter().map(|r| r[c]).collect();
            let pos: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            let curve = match roc_curve(&col, &pos) {
                Ok(curve) => Some(curve),
                Err(AnalyticsError::DegenerateClass(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(ClassRoc { label, curve })
        })
        .collect::<Result<_, _>>()?;
    Ok(RocSet { classes })
}

pub fn roc_ovr_crops(
    scores: &[[f64; CropClass::COUNT]],
    labels: &[CropClass],
) -> Result<RocSet, AnalyticsError> {
    let rows: Vec<Vec<f64>> = scores.iter().map(|r| r.to_vec()).collect();
    let truth: Vec<usize> = labels.iter().map(|c| c.index()).collect();
    roc_ovr(crop_labels(), &rows, &truth)
}

/// Everything derived from scoring a model on a labelled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub confusion: ConfusionMatrix,
    pub report: EvaluationReport,
    pub roc: RocSet,
}

pub fn evaluate_model(
    model: &RecommendationModel,
    data: &LabeledDataset,
) -> Result<ModelEvaluation, AnalyticsError> {
    let scores: Vec<[f64; CropClass::COUNT]> =
        data.rows.iter().map(|(v, _)| predict_proba(model, v)).collect();
    let preds: Vec<CropClass> = scores
        .iter()
        .map(|s| {
            let best = (0..CropClass::COUNT).fold(0, |b, i| if s[i] > s[b] { i } else { b });
            CropClass::ALL[best]
        })
        .collect();
    let labels = data.labels();
    let confusion = confusion(&preds, &labels)?;
    let report = classification_report(&confusion)?;
    let roc = roc_ovr_crops(&scores, &labels)?;
    Ok(ModelEvaluation { confusion, report, roc })
}

// ---------------------------------------------------------------------------
// Correlation and histograms
// ---------------------------------------------------------------------------

/// Pearson coefficient; 0 when either series has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub features: Vec<String>,
    pub values: [[f64; FeatureVector::LEN]; FeatureVector::LEN],
}

pub fn pearson_matrix(data: &LabeledDataset) -> Result<CorrelationMatrix, AnalyticsError> {
    if data.len() < 2 {
        return Err(AnalyticsError::TooFewRows(data.len()));
    }
    let cols: Vec<Vec<f64>> = (0..FeatureVector::LEN).map(|j| data.column(j)).collect();
    let mut values = [[0.0; FeatureVector::LEN]; FeatureVector::LEN];
    for i in 0..FeatureVector::LEN {
        values[i][i] = 1.0;
        for j in i + 1..FeatureVector::LEN {
            let r = pearson(&cols[i], &cols[j]);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { features: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(), values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub feature: String,
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Bounds of the most populated bin (first one on ties).
    pub fn modal_bin(&self) -> (f64, f64) {
        let best = (0..self.counts.len()).fold(0, |b, i| if self.counts[i] > self.counts[b] { i } else { b });
        (self.edges[best], self.edges[best + 1])
    }
}

/// Equal-width bins over `[min, max]`; every bin is half-open except the
/// last, which also takes `max`. A constant series gets a unit-wide span
/// centred on its value.
pub fn histogram_values(feature: &str, values: &[f64], bins: usize) -> Result<Histogram, AnalyticsError> {
    if bins == 0 {
        return Err(AnalyticsError::ZeroBins);
    }
    if values.is_empty() {
        return Err(AnalyticsError::EmptyData);
    }
    let mut lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);

    let mut counts = vec![0u64; bins];
    for &v in values {
        let mut idx = (((v - lo) / (hi - lo)) * bins as f64).floor().max(0.0) as usize;
        idx = idx.min(bins - 1);
        while idx > 0 && v < edges[idx] {
            idx -= 1;
        }
        while idx + 1 < bins && v >= edges[idx + 1] {
            idx += 1;
        }
        counts[idx] += 1;
    }
    Ok(Histogram { feature: feature.to_string(), edges, counts })
}

pub fn histogram(data: &LabeledDataset, feature: &str, bins: usize) -> Result<Histogram, AnalyticsError> {
    let j = FeatureVector::index_of(feature)
        .ok_or_else(|| AnalyticsError::UnknownFeature(feature.to_string()))?;
    histogram_values(FEATURE_NAMES[j], &data.column(j), bins)
}

// ---------------------------------------------------------------------------
// Plot data
// ---------------------------------------------------------------------------

pub enum PlotArtifact<'a> {
    /// Written to a single CSV file.
    Report(&'a EvaluationReport),
    /// Written as one `roc_<class>.json` per class into a directory.
    Roc(&'a RocSet),
    /// Written to a single CSV file.
    Correlation(&'a CorrelationMatrix),
    /// Written to a single long-format CSV file.
    Histograms(&'a [Histogram]),
    /// Written to a single CSV file.
    Confusion(&'a ConfusionMatrix),
}

pub fn report_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("class,precision,recall,f1,support\n");
    for c in &report.classes {
        let _ = writeln!(out, "{},{},{},{},{}", c.label, c.precision, c.recall, c.f1, c.support);
    }
    let _ = writeln!(out, "accuracy,,,{},{}", report.accuracy, report.total);
    for (name, a) in [("macro avg", &report.macro_avg), ("weighted avg", &report.weighted_avg)] {
        let _ = writeln!(out, "{},{},{},{},{}", name, a.precision, a.recall, a.f1, a.support);
    }
    out
}

pub fn correlation_csv(m: &CorrelationMatrix) -> String {
    let mut out = format!("feature,{}\n", m.features.join(","));
    for (name, row) in m.features.iter().zip(&m.values) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{},{}", name, cells.join(","));
    }
    out
}

pub fn histograms_csv(hists: &[Histogram]) -> String {
    let mut out = String::from("feature,bin_low,bin_high,count\n");
    for h in hists {
        for (i, c) in h.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", h.feature, h.edges[i], h.edges[i + 1], c);
        }
    }
    out
}

pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let mut out = format!("true\\predicted,{}\n", cm.labels.join(","));
    for (label, row) in cm.labels.iter().zip(&cm.counts) {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "{},{}", label, cells.join(","));
    }
    out
}

fn file_safe(label: &str) -> String {
    label.replace(' ', "_")
}

/// Writes `artifact` under `path` and returns the files produced.
pub fn emit_plot_data(artifact: PlotArtifact<'_>, path: &Path) -> Result<Vec<PathBuf>, AnalyticsError> {
    let write = |p: &Path, text: String| fs::write(p, text).map_err(|e| io_err(p, e));
    match artifact {
        PlotArtifact::Report(r) => write(path, report_csv(r)).map(|_| vec![path.to_path_buf()]),
        PlotArtifact::Correlation(m) => write(path, correlation_csv(m)).map(|_| vec![path.to_path_buf()]),
        PlotArtifact::Histograms(h) => write(path, histograms_csv(h)).map(|_| vec![path.to_path_buf()]),
        PlotArtifact::Confusion(cm) => write(path, confusion_csv(cm)).map(|_| vec![path.to_path_buf()]),
        PlotArtifact::Roc(set) => {
            fs::create_dir_all(path).map_err(|e| io_err(path, e))?;
            let mut files = Vec::new();
            for class in &set.classes {
                let file = path.join(format!("roc_{}.json", file_safe(&class.label)));
                let body = serde_json::json!({
                    "class": class.label,
                    "auc": class.curve.as_ref().map(|c| c.auc),
                    "points": class.curve.as_ref().map(|c| &c.points),
                });
                write(&file, serde_json::to_string_pretty(&body).expect("json") + "\n")?;
                files.push(file);
            }
            Ok(files)
        }
    }
}
