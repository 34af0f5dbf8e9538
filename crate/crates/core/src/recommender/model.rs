use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CropClass, LabeledDataset, RecommendError};
use crate::twin::{FeatureVector, FEATURE_NAMES};

const N_FEATURES: usize = FeatureVector::LEN;
/// Weight row width: one weight per feature plus a trailing bias.
pub const ROW_LEN: usize = N_FEATURES + 1;

pub type Weights = [[f64; ROW_LEN]; CropClass::COUNT];
pub type Distribution = [f64; CropClass::COUNT];

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: [f64; N_FEATURES],
    pub std: [f64; N_FEATURES],
}

impl ScalerParams {
    pub fn identity() -> Self {
        Self { mean: [0.0; N_FEATURES], std: [1.0; N_FEATURES] }
    }
}

/// Per-feature mean and population standard deviation. Zero-variance
/// features get a standard deviation of 1.
pub fn fit_scaler(data: &LabeledDataset) -> Result<ScalerParams, RecommendError> {
    if data.is_empty() {
        return Err(RecommendError::EmptyDataset);
    }
    let n = data.len() as f64;
    let mut mean = [0.0; N_FEATURES];
    for (v, _) in &data.rows {
        for (m, x) in mean.iter_mut().zip(v.0) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = [0.0; N_FEATURES];
    for (v, _) in &data.rows {
        for j in 0..N_FEATURES {
            std[j] += (v.0[j] - mean[j]).powi(2);
        }
    }
    for s in &mut std {
        *s = (*s / n).sqrt();
        if !(*s > 0.0) {
            *s = 1.0;
        }
    }
    Ok(ScalerParams { mean, std })
}

pub fn apply_scaler(params: &ScalerParams, v: &FeatureVector) -> FeatureVector {
    let mut out = [0.0; N_FEATURES];
    for j in 0..N_FEATURES {
        out[j] = (v.0[j] - params.mean[j]) / params.std[j];
    }
    FeatureVector(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub l2: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self { learning_rate: 0.5, epochs: 3000, seed: 42, l2: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub training_rows: usize,
    /// Regularized mean cross-entropy after the last update.
    pub final_loss: f64,
}

/// Standardization followed by a 22-way softmax over linear class scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationModel {
    pub scaler: ScalerParams,
    pub weights: Weights,
    pub metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    classes: Vec<String>,
    features: Vec<String>,
    #[serde(flatten)]
    model: RecommendationModel,
}

impl RecommendationModel {
    /// All-zero weights: every crop equally likely.
    pub fn zero(scaler: ScalerParams) -> Self {
        Self {
            scaler,
            weights: [[0.0; ROW_LEN]; CropClass::COUNT],
            metadata: TrainingMetadata {
                seed: 0,
                epochs: 0,
                learning_rate: 0.0,
                l2: 0.0,
                training_rows: 0,
                final_loss: (CropClass::COUNT as f64).ln(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            classes: CropClass::ALL.iter().map(|c| c.label().to_string()).collect(),
            features: FEATURE_NAMES.iter().map(|f| f.to_string()).collect(),
            model: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RecommendError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| RecommendError::Data(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(RecommendError::UnsupportedFormat(file.format_version));
        }
        let classes: Vec<&str> = CropClass::ALL.iter().map(|c| c.label()).collect();
        if file.classes != classes || file.features != FEATURE_NAMES {
            return Err(RecommendError::Data("class or feature list does not match".into()));
        }
        if file.model.scaler.std.iter().any(|s| !(*s > 0.0)) {
            return Err(RecommendError::Data("scaler std must be positive".into()));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RecommendError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| RecommendError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RecommendError> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|e| RecommendError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn scores_scaled(weights: &Weights, x: &[f64; N_FEATURES]) -> Distribution {
    let mut z = [0.0; CropClass::COUNT];
    for (zc, w) in z.iter_mut().zip(weights) {
        let mut s = w[N_FEATURES];
        for j in 0..N_FEATURES {
            s += w[j] * x[j];
        }
        *zc = s;
    }
    z
}

/// Numerically stable softmax.
pub fn softmax(scores: &Distribution) -> Distribution {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; CropClass::COUNT];
    let mut sum = 0.0;
    for (o, s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
    out
}

/// Linear class scores for a raw (unscaled) feature vector.
pub fn class_scores(model: &RecommendationModel, v: &FeatureVector) -> Distribution {
    scores_scaled(&model.weights, &apply_scaler(&model.scaler, v).0)
}

pub fn predict_proba(model: &RecommendationModel, v: &FeatureVector) -> Distribution {
    softmax(&class_scores(model, v))
}

/// Slice entry point for callers holding untyped input.
pub fn predict_proba_slice(model: &RecommendationModel, v: &[f64]) -> Result<Distribution, RecommendError> {
    Ok(predict_proba(model, &FeatureVector::try_from(v)?))
}

pub fn predict(model: &RecommendationModel, v: &FeatureVector) -> CropClass {
    let p = predict_proba(model, v);
    let best = (0..CropClass::COUNT).fold(0, |b, i| if p[i] > p[b] { i } else { b });
    CropClass::ALL[best]
}

/// Mean cross-entropy plus `l2 / 2 * ||W||²` (bias excluded) over already
/// standardized rows, and its gradient with respect to the weights.
pub fn loss_and_gradient(
    weights: &Weights,
    scaled: &[(FeatureVector, CropClass)],
    l2: f64,
) -> (f64, Weights) {
    let n = scaled.len() as f64;
    let mut grad = [[0.0; ROW_LEN]; CropClass::COUNT];
    let mut loss = 0.0;
    for (x, y) in scaled {
        let z = scores_scaled(weights, &x.0);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = max + z.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        loss += log_sum - z[y.index()];
        for c in 0..CropClass::COUNT {
            let residual = (z[c] - log_sum).exp() - if c == y.index() { 1.0 } else { 0.0 };
            let g = &mut grad[c];
            for j in 0..N_FEATURES {
                g[j] += residual * x.0[j];
            }
            g[N_FEATURES] += residual;
        }
    }
    loss /= n;
    for (g, w) in grad.iter_mut().zip(weights) {
        for j in 0..ROW_LEN {
            g[j] /= n;
        }
        for j in 0..N_FEATURES {
            g[j] += l2 * w[j];
            loss += 0.5 * l2 * w[j] * w[j];
        }
    }
    (loss, grad)
}

fn step(weights: &mut Weights, grad: &Weights, lr: f64) {
    for (w, g) in weights.iter_mut().zip(grad) {
        for j in 0..ROW_LEN {
            w[j] -= lr * g[j];
        }
    }
}

/// Result of [`train_with_history`]: the model and the loss before each epoch
/// plus the final loss.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub model: RecommendationModel,
    pub loss_history: Vec<f64>,
}

/// Full-batch gradient descent on the regularized cross-entropy, starting
/// from zero weights. The outcome depends only on the data and `hyper`; the
/// seed is recorded for the caller's data split.
pub fn train_with_history(data: &LabeledDataset, hyper: &Hyperparams) -> Result<TrainingRun, RecommendError> {
    if data.is_empty() {
        return Err(RecommendError::EmptyDataset);
    }
    if data.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(RecommendError::SingleClass);
    }
    let scaler = fit_scaler(data)?;
    let scaled: Vec<(FeatureVector, CropClass)> =
        data.rows.iter().map(|(v, c)| (apply_scaler(&scaler, v), *c)).collect();

    let mut weights = [[0.0; ROW_LEN]; CropClass::COUNT];
    let mut history = Vec::with_capacity(hyper.epochs + 1);
    for _ in 0..hyper.epochs {
        let (loss, grad) = loss_and_gradient(&weights, &scaled, hyper.l2);
        history.push(loss);
        step(&mut weights, &grad, hyper.learning_rate);
    }
    let (final_loss, _) = loss_and_gradient(&weights, &scaled, hyper.l2);
    history.push(final_loss);

    Ok(TrainingRun {
        model: RecommendationModel {
            scaler,
            weights,
            metadata: TrainingMetadata {
                seed: hyper.seed,
                epochs: hyper.epochs,
                learning_rate: hyper.learning_rate,
                l2: hyper.l2,
                training_rows: data.len(),
                final_loss,
            },
        },
        loss_history: history,
    })
}

pub fn train(data: &LabeledDataset, hyper: &Hyperparams) -> Result<RecommendationModel, RecommendError> {
    train_with_history(data, hyper).map(|run| run.model)
}

/// One unregularized cross-entropy gradient step on a single labelled
/// sample. The scaler is left as trained.
pub fn update_online(
    model: &RecommendationModel,
    sample: &(FeatureVector, CropClass),
    learning_rate: f64,
) -> RecommendationModel {
    let scaled = [(apply_scaler(&model.scaler, &sample.0), sample.1)];
    let (_, grad) = loss_and_gradient(&model.weights, &scaled, 0.0);
    let mut next = model.clone();
    step(&mut next.weights, &grad, learning_rate);
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedCrop {
    pub crop: CropClass,
    pub probability: f64,
}

/// Top-k crops, highest first, with probabilities renormalized over the
/// returned entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub crops: Vec<RankedCrop>,
}

impl Recommendation {
    /// Keeps the `k` most likely crops (ties go to the alphabetically earlier
    /// crop) and rescales them to sum to one.
    pub fn from_distribution(probs: &Distribution, k: usize) -> Result<Self, RecommendError> {
        if k == 0 || k > CropClass::COUNT {
            return Err(RecommendError::BadK(k));
        }
        let mut order: Vec<usize> = (0..CropClass::COUNT).collect();
        // stable sort keeps alphabetical order among equal probabilities
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
        order.truncate(k);
        let mass: f64 = order.iter().map(|&i| probs[i]).sum();
        let crops = order
            .into_iter()
            .map(|i| RankedCrop {
                crop: CropClass::ALL[i],
                probability: if mass > 0.0 { probs[i] / mass } else { 1.0 / k as f64 },
            })
            .collect();
        Ok(Self { crops })
    }

    pub fn top(&self) -> CropClass {
        self.crops[0].crop
    }
}

pub fn recommend_top_k(
    model: &RecommendationModel,
    v: &FeatureVector,
    k: usize,
) -> Result<Recommendation, RecommendError> {
    Recommendation::from_distribution(&predict_proba(model, v), k)
}
