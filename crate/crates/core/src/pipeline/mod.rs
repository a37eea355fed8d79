//! Training and evaluation of the two classifiers: an LSTM over windows of
//! consecutive server names and a fully-connected network over per-trace
//! name frequencies.
//!
//! Metrics count TP/FP/TN/FN over every label slot of every sample, so
//! accuracy is `(TP + TN) / (TP + FP + TN + FN)`.

mod ablation;
mod eval;
mod model;
mod stats;
mod train;

use thiserror::Error;

pub use ablation::{ablate_scrub, compare_reports, AblationReport, Comparison};
pub use eval::{
    bits_of, evaluate, evaluate_dataset, read_predictions, write_predictions, ClassMetrics, ConfusionTotals,
    EvalOptions, EvalReport, Evaluation, PredictionRecord, SampleMetrics,
};
pub use model::{
    decide, empty_window, predict, FcClassifier, FcModelSpec, LstmClassifier, LstmModelSpec, Model, ModelKind,
    ModelMeta, Network, Prediction, SampleInput, StopReason, TrainingSummary,
};
pub use stats::{incomplete_beta, ln_gamma, paired_t_test, student_t_cdf, student_t_two_sided, TTest};
pub use train::{resume_meta, train_fc, train_lstm, TrainOptions, TrainRun, TrainState};

use crate::corpus::CorpusError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no usable training traces")]
    EmptyTrainSet,
    #[error("nothing to evaluate")]
    EmptySet,
    #[error("vocabulary hash {found} does not match the model's {expected}")]
    VocabularyMismatch { expected: String, found: String },
    #[error("website universe differs from the one the model was trained on")]
    UniverseMismatch,
    #[error("{} model cannot score {input} samples", model.as_str())]
    WrongInput { model: ModelKind, input: &'static str },
    #[error("vectors have different lengths ({a} and {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("a paired test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("reports cover different classes")]
    ClassMismatch,
    #[error("invalid model spec: {0}")]
    BadSpec(String),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("cannot resume: {0}")]
    ResumeMismatch(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
