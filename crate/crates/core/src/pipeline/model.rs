use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::corpus::{LabelVector, Vocabulary, WebsiteUniverse, OOV_INDEX};
use crate::nn::{
    dense_forward, load_checkpoint, lstm_final_state, save_checkpoint, sigmoid, Activation, Checkpoint,
    DenseParams, LstmInput, LstmParams, NnError, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lstm,
    Fc,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Fc => "fc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmModelSpec {
    pub hidden: usize,
    pub window: usize,
    pub lr: f64,
    /// Evaluations without validation improvement before stopping.
    pub patience: u32,
    pub eval_every: u64,
    pub threshold: f64,
    pub batch_size: usize,
    /// Share of the training traces held out for early stopping.
    pub validation_fraction: f64,
    /// Cap on the fixed set of validation windows scored at each
    /// evaluation.
    pub validation_windows: usize,
    /// Hard cap on optimizer steps.
    pub max_steps: u64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for LstmModelSpec {
    fn default() -> Self {
        LstmModelSpec {
            hidden: 256,
            window: 20,
            lr: 0.01,
            patience: 5,
            eval_every: 500,
            threshold: 0.5,
            batch_size: 1,
            validation_fraction: 0.1,
            validation_windows: 1024,
            max_steps: 100_000,
            clip_norm: Some(5.0),
        }
    }
}

impl LstmModelSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let ok = self.hidden > 0
            && self.window > 0
            && self.lr > 0.0
            && self.eval_every > 0
            && self.batch_size > 0
            && self.validation_windows > 0
            && self.max_steps > 0
            && self.validation_fraction > 0.0
            && self.validation_fraction < 1.0
            && (0.0..=1.0).contains(&self.threshold)
            && self.clip_norm.is_none_or(|c| c > 0.0);
        if ok {
            Ok(())
        } else {
            Err(PipelineError::BadSpec(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FcModelSpec {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub epochs: u64,
    pub lr: f64,
    pub threshold: f64,
    /// Traces per optimizer step; `None` is one full-batch step per epoch.
    pub batch_size: Option<usize>,
}

impl Default for FcModelSpec {
    fn default() -> Self {
        FcModelSpec { hidden: vec![256, 218, 64], dropout: 0.2, epochs: 50, lr: 0.01, threshold: 0.5, batch_size: None }
    }
}

impl FcModelSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let ok = !self.hidden.is_empty()
            && self.hidden.iter().all(|&h| h > 0)
            && (0.0..1.0).contains(&self.dropout)
            && self.epochs > 0
            && self.lr > 0.0
            && (0.0..=1.0).contains(&self.threshold)
            && self.batch_size.is_none_or(|b| b > 0);
        if ok {
            Ok(())
        } else {
            Err(PipelineError::BadSpec(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopping,
    MaxSteps,
    Epochs,
    /// Stopped by the caller before the run finished; resumable.
    Paused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub steps: u64,
    pub epochs: u64,
    pub evaluations: u64,
    pub best_val_loss: Option<f64>,
    pub last_train_loss: Option<f64>,
    pub stop_reason: StopReason,
}

/// Everything a checkpoint records about how its model was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub kind: ModelKind,
    pub toolkit_version: String,
    pub universe: Vec<String>,
    pub vocabulary_hash: String,
    pub vocabulary_size: usize,
    pub seed: u64,
    pub lstm: Option<LstmModelSpec>,
    pub fc: Option<FcModelSpec>,
    pub summary: TrainingSummary,
}

impl ModelMeta {
    pub fn threshold(&self) -> f64 {
        match (&self.lstm, &self.fc) {
            (Some(s), _) => s.threshold,
            (None, Some(s)) => s.threshold,
            (None, None) => 0.5,
        }
    }

    pub fn check_vocabulary(&self, vocab: &Vocabulary) -> Result<(), PipelineError> {
        let found = vocab.hash();
        if found != self.vocabulary_hash {
            return Err(PipelineError::VocabularyMismatch { expected: self.vocabulary_hash.clone(), found });
        }
        Ok(())
    }

    pub fn check_universe(&self, universe: &WebsiteUniverse) -> Result<(), PipelineError> {
        if universe.sites() != self.universe.as_slice() {
            return Err(PipelineError::UniverseMismatch);
        }
        Ok(())
    }
}

/// LSTM over one-hot server names, then a linear layer to one logit per
/// site from the final hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmClassifier {
    pub lstm: LstmParams,
    pub out: DenseParams,
}

impl LstmClassifier {
    pub fn init(vocab: usize, hidden: usize, classes: usize, rng: &mut impl Rng) -> Self {
        let lstm = LstmParams::init(vocab, hidden, rng);
        let out = DenseParams::init(hidden, classes, rng);
        LstmClassifier { lstm, out }
    }

    /// `indices[b * steps + t]`; returns logits `[B, n]`.
    pub fn logits(&self, batch: usize, steps: usize, indices: &[usize]) -> Result<Tensor, NnError> {
        let state = lstm_final_state(&self.lstm, &LstmInput::OneHot { batch, steps, indices })?;
        Ok(dense_forward(&self.out, &state.h, Activation::Identity)?.0)
    }
}

/// ReLU hidden layers with dropout, then a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FcClassifier {
    pub layers: Vec<DenseParams>,
    pub dropout: f64,
}

impl FcClassifier {
    pub fn init(input: usize, hidden: &[usize], classes: usize, dropout: f64, rng: &mut impl Rng) -> Self {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(classes);
        let layers = dims.windows(2).map(|w| DenseParams::init(w[0], w[1], rng)).collect();
        FcClassifier { layers, dropout }
    }

    /// Inference logits for `x` of shape `[B, V]`; dropout is the identity
    /// here.
    pub fn logits(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let act = if i == last { Activation::Identity } else { Activation::Relu };
            h = dense_forward(layer, &h, act)?.0;
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Lstm(LstmClassifier),
    Fc(FcClassifier),
}

impl Network {
    pub fn params(&self) -> Vec<(String, &Tensor)> {
        match self {
            Network::Lstm(m) => vec![
                ("lstm.w_input".into(), &m.lstm.w_input),
                ("lstm.w_hidden".into(), &m.lstm.w_hidden),
                ("lstm.bias".into(), &m.lstm.bias),
                ("out.weight".into(), &m.out.weight),
                ("out.bias".into(), &m.out.bias),
            ],
            Network::Fc(m) => m
                .layers
                .iter()
                .enumerate()
                .flat_map(|(i, l)| [(format!("fc{i}.weight"), &l.weight), (format!("fc{i}.bias"), &l.bias)])
                .collect(),
        }
    }

    /// Same order as [`Network::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Network::Lstm(m) => {
                vec![&mut m.lstm.w_input, &mut m.lstm.w_hidden, &mut m.lstm.bias, &mut m.out.weight, &mut m.out.bias]
            }
            Network::Fc(m) => m.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect(),
        }
    }

    /// Rebuilds a network of the same architecture as `self` from named
    /// tensors, checking every shape.
    pub(crate) fn load_params(&mut self, prefix: &str, ckpt: &Checkpoint) -> Result<(), PipelineError> {
        let names: Vec<(String, Vec<usize>)> =
            self.params().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect();
        for ((name, shape), slot) in names.into_iter().zip(self.params_mut()) {
            let t = ckpt.get(&format!("{prefix}{name}"))?;
            t.expect_shape("checkpoint", &shape)?;
            *slot = t.clone();
        }
        Ok(())
    }
}

/// A trained classifier together with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub meta: ModelMeta,
    pub net: Network,
}

pub(crate) const MODEL_PREFIX: &str = "model.";

impl Model {
    /// An uninitialized (all-zero) network with the architecture `meta`
    /// describes.
    pub(crate) fn skeleton(meta: &ModelMeta) -> Result<Network, PipelineError> {
        let (v, n) = (meta.vocabulary_size, meta.universe.len());
        match (meta.kind, &meta.lstm, &meta.fc) {
            (ModelKind::Lstm, Some(s), _) => Ok(Network::Lstm(LstmClassifier {
                lstm: LstmParams::zeros(v, s.hidden),
                out: DenseParams { weight: Tensor::zeros(&[s.hidden, n]), bias: Tensor::zeros(&[n]) },
            })),
            (ModelKind::Fc, _, Some(s)) => {
                let mut dims = vec![v];
                dims.extend_from_slice(&s.hidden);
                dims.push(n);
                let layers = dims
                    .windows(2)
                    .map(|w| DenseParams { weight: Tensor::zeros(&[w[0], w[1]]), bias: Tensor::zeros(&[w[1]]) })
                    .collect();
                Ok(Network::Fc(FcClassifier { layers, dropout: s.dropout }))
            }
            _ => Err(PipelineError::BadCheckpoint(format!("{} model without its spec", meta.kind.as_str()))),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, PipelineError> {
        let meta: ModelMeta = serde_json::from_value(
            ckpt.metadata.get("model").cloned().ok_or_else(|| PipelineError::BadCheckpoint("no model metadata".into()))?,
        )?;
        let mut net = Self::skeleton(&meta)?;
        net.load_params(MODEL_PREFIX, ckpt)?;
        Ok(Model { meta, net })
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint, PipelineError> {
        let mut ckpt = Checkpoint::new(serde_json::json!({ "model": serde_json::to_value(&self.meta)? }));
        for (name, t) in self.net.params() {
            ckpt.push(format!("{MODEL_PREFIX}{name}"), t.clone());
        }
        Ok(ckpt)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        Self::from_checkpoint(&load_checkpoint(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        Ok(save_checkpoint(path, &self.to_checkpoint()?)?)
    }

    pub fn window(&self) -> Option<usize> {
        self.meta.lstm.as_ref().map(|s| s.window)
    }

    /// Sigmoid probabilities for a batch of windows (`indices[b·T + t]`).
    pub fn window_probabilities(&self, batch: usize, indices: &[usize]) -> Result<Vec<Vec<f64>>, PipelineError> {
        let (Network::Lstm(m), Some(spec)) = (&self.net, &self.meta.lstm) else {
            return Err(PipelineError::WrongInput { model: self.meta.kind, input: "window" });
        };
        let logits = m.logits(batch, spec.window, indices)?;
        Ok(rows_to_probabilities(&logits))
    }

    /// Sigmoid probabilities for a batch of frequency vectors.
    pub fn frequency_probabilities(&self, counts: &[&[u32]]) -> Result<Vec<Vec<f64>>, PipelineError> {
        let Network::Fc(m) = &self.net else {
            return Err(PipelineError::WrongInput { model: self.meta.kind, input: "frequency" });
        };
        let v = self.meta.vocabulary_size;
        let mut x = Vec::with_capacity(counts.len() * v);
        for c in counts {
            if c.len() != v {
                return Err(NnError::ShapeMismatch { op: "fc_input", expected: vec![v], found: vec![c.len()] }.into());
            }
            x.extend(c.iter().map(|&n| n as f64));
        }
        let logits = m.logits(&Tensor::from_vec(&[counts.len(), v], x)?)?;
        Ok(rows_to_probabilities(&logits))
    }
}

fn rows_to_probabilities(logits: &Tensor) -> Vec<Vec<f64>> {
    let n = logits.shape()[1];
    logits.data().chunks_exact(n).map(|row| row.iter().map(|&z| sigmoid(z)).collect()).collect()
}

/// One model input, already encoded against the model's vocabulary.
#[derive(Debug, Clone, Copy)]
pub enum SampleInput<'a> {
    Window(&'a [usize]),
    Frequency(&'a [u32]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub decision: LabelVector,
}

/// Slot `i` is positive iff `p_i ≥ threshold`; a probability exactly at
/// the threshold counts as positive.
pub fn decide(probabilities: &[f64], threshold: f64) -> LabelVector {
    LabelVector::from_bits(probabilities.iter().map(|&p| p >= threshold).collect())
}

/// Scores one sample. The caller's vocabulary must be the one the model
/// was trained with.
pub fn predict(model: &Model, vocabulary: &Vocabulary, input: SampleInput<'_>) -> Result<Prediction, PipelineError> {
    model.meta.check_vocabulary(vocabulary)?;
    let probabilities = match input {
        SampleInput::Window(w) => {
            let t = model.window().ok_or(PipelineError::WrongInput { model: model.meta.kind, input: "window" })?;
            if w.len() != t {
                return Err(NnError::ShapeMismatch { op: "predict", expected: vec![t], found: vec![w.len()] }.into());
            }
            model.window_probabilities(1, w)?.remove(0)
        }
        SampleInput::Frequency(c) => model.frequency_probabilities(&[c])?.remove(0),
    };
    let decision = decide(&probabilities, model.meta.threshold());
    Ok(Prediction { probabilities, decision })
}

/// The window scored for a trace with no events.
pub fn empty_window(window: usize) -> Vec<usize> {
    vec![OOV_INDEX; window]
}
