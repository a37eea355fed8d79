//! A small 64-bit neural network engine: tensors, dense layers, a batched
//! LSTM, dropout, sigmoid cross-entropy, Adam and a checkpoint format.
//!
//! Every operation is an explicit forward/backward pair; there is no
//! autodiff graph.

mod adam;
mod checkpoint;
mod dense;
pub mod gradcheck;
mod loss;
mod lstm;
mod tensor;

use thiserror::Error;

pub use adam::{clip_global_norm, AdamConfig, AdamState};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use dense::{dense_backward, dense_forward, dropout, Activation, DenseCache, DenseGrads, DenseParams};
pub use loss::{sigmoid, sigmoid_ce_loss};
pub use lstm::{
    lstm_backward, lstm_final_state, lstm_forward, LstmCache, LstmForward, LstmGrads, LstmInput, LstmParams,
    LstmState, GATES,
};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{op}: expected shape {expected:?}, found {found:?}")]
    ShapeMismatch { op: &'static str, expected: Vec<usize>, found: Vec<usize> },
    #[error("{op}: produced a NaN or infinite value")]
    NonFiniteValue { op: &'static str },
    #[error("input index {index} out of range for dimension {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dropout rate {0} outside [0, 1)")]
    BadRate(f64),
    #[error("not a checkpoint (magic {0:02x?})")]
    BadMagic([u8; 4]),
    #[error("checkpoint format version {found}, this build reads version {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint at byte {offset}: {reason}")]
    CorruptTensor { offset: usize, reason: String },
    #[error("checkpoint has no tensor named {0:?}")]
    MissingTensor(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint metadata: {0}")]
    Json(#[from] serde_json::Error),
}
