//! Crop recommendation: a multinomial logistic regression over the seven
//! soil and weather features, trained by full-batch gradient descent and
//! served as a ranked, renormalized top-k list.

mod crop;
mod dataset;
mod model;

use thiserror::Error;

pub use crop::CropClass;
pub use dataset::{synthetic_dataset, LabeledDataset, CROP_MEANS, CROP_RANGES, SYNTHETIC_WIDTH_TO_SD};
pub use model::{
    apply_scaler, class_scores, fit_scaler, loss_and_gradient, predict, predict_proba, predict_proba_slice,
    recommend_top_k, softmax, train, train_with_history, update_online, Distribution, Hyperparams,
    RankedCrop, Recommendation, RecommendationModel, ScalerParams, TrainingMetadata, TrainingRun, Weights,
    MODEL_FORMAT_VERSION, ROW_LEN,
};

use crate::twin::ShapeMismatch;

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training data contains fewer than two classes")]
    SingleClass,
    #[error(transparent)]
    ShapeMismatch(#[from] ShapeMismatch),
    #[error("k must be between 1 and 22, got {0}")]
    BadK(usize),
    #[error("unknown crop `{0}`")]
    UnknownCrop(String),
    #[error("unsupported model format version {0}")]
    UnsupportedFormat(u32),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(String),
}
