//! Per-voice conditional distributions `p_i(V_i^t | context)`: feature
//! encoding, MaxEnt and one-hidden-layer MLP classifiers, training,
//! gradient checks and the model file format.

mod classifier;
mod features;
mod file;
mod set;
mod softmax;
mod train;

pub use classifier::{gradient, gradient_check, GradientCheck, MaxEnt, Mlp, ModelKind, Scratch, VoiceModel, DEFAULT_HIDDEN, GRADIENT_CHECK_STEP, RELATIVE_FLOOR};
pub use features::{encode, DenseFeatures, FeatureLayout, Features, SparseFeatures, METADATA_WIDTH};
pub use file::{ModelHeader, Shape, FORMAT_VERSION, MAGIC};
pub use set::ModelSet;
pub use softmax::{log_softmax_at, softmax, softmax_in_place};
pub use train::{train, EpochMetrics, Hyperparameters, SplitMetrics, TrainReport, DEFAULT_DELTA_T};

use crate::score::{Encoding, ScoreError};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training split is empty")]
    EmptyCorpus,
    #[error("corrupt model: {0}")]
    CorruptModel(String),
    #[error("model format version {found}, this build reads {expected}")]
    VersionMismatch { found: u64, expected: u32 },
    #[error("model uses {model} encoding, input is {input}")]
    EncodingMismatch { model: Encoding, input: Encoding },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error(transparent)]
    Score(#[from] ScoreError),
}
