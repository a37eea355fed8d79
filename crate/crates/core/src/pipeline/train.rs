use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{
    FcClassifier, FcModelSpec, LstmClassifier, LstmModelSpec, Model, ModelKind, ModelMeta, Network, StopReason,
    TrainingSummary,
};
use super::PipelineError;
use crate::corpus::{split_by_key, valid_starts, Dataset, EncodedTrace, SplitSide};
use crate::nn::{
    clip_global_norm, dense_backward, dense_forward, dropout, lstm_backward, lstm_forward, sigmoid_ce_loss,
    Activation, AdamConfig, AdamState, Checkpoint, LstmInput, Tensor,
};
use crate::rng;

const PARAM_PREFIX: &str = "train.param.";
const ADAM_M_PREFIX: &str = "train.adam_m.";
const ADAM_V_PREFIX: &str = "train.adam_v.";
const VALIDATION_BATCH: usize = 256;

/// Loop counters that, with the current parameters and Adam moments, fully
/// determine how a run continues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub step: u64,
    pub epoch: u64,
    pub evaluations: u64,
    pub best_val_loss: Option<f64>,
    pub bad_evals: u32,
    pub last_train_loss: Option<f64>,
    pub adam_t: u64,
    /// Position of the sampling stream, as a decimal `u128`.
    pub rng_word_pos: String,
    pub finished: Option<StopReason>,
}

impl TrainState {
    fn fresh() -> Self {
        TrainState {
            step: 0,
            epoch: 0,
            evaluations: 0,
            best_val_loss: None,
            bad_evals: 0,
            last_train_loss: None,
            adam_t: 0,
            rng_word_pos: "0".into(),
            finished: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions<'a> {
    /// Continue the run stored in this checkpoint.
    pub resume: Option<&'a Checkpoint>,
    /// Stop (resumably) once this many optimizer steps (LSTM) or epochs
    /// (FC) have run in total.
    pub pause_after: Option<u64>,
}

/// A finished or paused run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    /// The model to evaluate: the best-validation parameters for the LSTM
    /// (current ones before the first evaluation), the final ones for FC.
    pub model: Model,
    pub current: Network,
    pub adam: AdamState,
    pub state: TrainState,
}

impl TrainRun {
    /// Model tensors plus everything needed to resume.
    pub fn to_checkpoint(&self) -> Result<Checkpoint, PipelineError> {
        let mut ckpt = self.model.to_checkpoint()?;
        if let serde_json::Value::Object(map) = &mut ckpt.metadata {
            map.insert("training".into(), serde_json::to_value(&self.state)?);
        }
        for (name, t) in self.current.params() {
            ckpt.push(format!("{PARAM_PREFIX}{name}"), t.clone());
        }
        for ((name, _), (m, v)) in self.current.params().into_iter().zip(self.adam.m.iter().zip(&self.adam.v)) {
            ckpt.push(format!("{ADAM_M_PREFIX}{name}"), m.clone());
            ckpt.push(format!("{ADAM_V_PREFIX}{name}"), v.clone());
        }
        Ok(ckpt)
    }
}

struct Restored {
    current: Network,
    best: Option<Network>,
    adam: AdamState,
    state: TrainState,
}

fn restore(ckpt: &Checkpoint, expected: &ModelMeta, lr: f64) -> Result<Restored, PipelineError> {
    let stored = Model::from_checkpoint(ckpt)?;
    fn same(m: &ModelMeta) -> impl PartialEq + '_ {
        (m.kind, &m.universe, &m.vocabulary_hash, m.vocabulary_size, m.seed, &m.lstm, &m.fc)
    }
    if same(&stored.meta) != same(expected) {
        return Err(PipelineError::ResumeMismatch(
            "checkpoint was trained with a different model kind, spec, seed, universe or vocabulary".into(),
        ));
    }
    let state: TrainState = serde_json::from_value(
        ckpt.metadata
            .get("training")
            .cloned()
            .ok_or_else(|| PipelineError::ResumeMismatch("checkpoint holds no training state".into()))?,
    )?;
    let mut current = Model::skeleton(expected)?;
    current.load_params(PARAM_PREFIX, ckpt)?;
    let mut adam = AdamState::new(AdamConfig::with_lr(lr), current.params().into_iter().map(|(_, t)| t));
    adam.t = state.adam_t;
    for ((name, _), (m, v)) in current.params().into_iter().zip(adam.m.iter_mut().zip(adam.v.iter_mut())) {
        let sm = ckpt.get(&format!("{ADAM_M_PREFIX}{name}"))?;
        let sv = ckpt.get(&format!("{ADAM_V_PREFIX}{name}"))?;
        sm.expect_shape("checkpoint", m.shape())?;
        sv.expect_shape("checkpoint", v.shape())?;
        *m = sm.clone();
        *v = sv.clone();
    }
    let best = state.best_val_loss.map(|_| stored.net);
    Ok(Restored { current, best, adam, state })
}

fn sampling_stream(seed: u64, tag: &str, state: &TrainState) -> Result<ChaCha8Rng, PipelineError> {
    let pos: u128 = state
        .rng_word_pos
        .parse()
        .map_err(|_| PipelineError::BadCheckpoint(format!("rng position {:?}", state.rng_word_pos)))?;
    let mut rng = rng::stream(seed, tag, 0);
    rng.set_word_pos(pos);
    Ok(rng)
}

fn summary(state: &TrainState) -> TrainingSummary {
    TrainingSummary {
        steps: state.step,
        epochs: state.epoch,
        evaluations: state.evaluations,
        best_val_loss: state.best_val_loss,
        last_train_loss: state.last_train_loss,
        stop_reason: state.finished.unwrap_or(StopReason::Paused),
    }
}

fn base_meta(dataset: &Dataset, kind: ModelKind, seed: u64) -> ModelMeta {
    ModelMeta {
        kind,
        toolkit_version: crate::VERSION.to_string(),
        universe: dataset.universe().sites().to_vec(),
        vocabulary_hash: dataset.vocabulary().hash(),
        vocabulary_size: dataset.vocabulary().len(),
        seed,
        lstm: None,
        fc: None,
        summary: summary(&TrainState::fresh()),
    }
}

/// Label-stratified hold-out of the training traces. Falls back to using
/// every trace on both sides when either side would be empty.
fn validation_split(traces: &[EncodedTrace], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), PipelineError> {
    let keys: Vec<Vec<bool>> = traces.iter().map(|t| t.label.bits().to_vec()).collect();
    let s = split_by_key(&keys, 1.0 - fraction, rng::derive_seed(seed, "validation", 0))?;
    if s.train.is_empty() || s.test.is_empty() {
        let all: Vec<usize> = (0..traces.len()).collect();
        return Ok((all.clone(), all));
    }
    Ok((s.train, s.test))
}

/// Every window of the validation traces if there are at most `cap` of
/// them, otherwise `cap` windows drawn with replacement.
fn validation_windows(traces: &[EncodedTrace], val: &[usize], spec: &LstmModelSpec, seed: u64) -> Vec<(usize, usize)> {
    let total: usize = val.iter().map(|&i| valid_starts(traces[i].len(), spec.window)).sum();
    if total <= spec.validation_windows {
        return val
            .iter()
            .flat_map(|&i| (0..valid_starts(traces[i].len(), spec.window)).map(move |s| (i, s)))
            .collect();
    }
    let mut rng = rng::stream(seed, "validation_windows", 0);
    (0..spec.validation_windows)
        .map(|_| {
            let i = val[rng.gen_range(0..val.len())];
            (i, rng.gen_range(0..valid_starts(traces[i].len(), spec.window)))
        })
        .collect()
}

fn validation_loss(
    model: &LstmClassifier,
    traces: &[EncodedTrace],
    windows: &[(usize, usize)],
    window: usize,
) -> Result<f64, PipelineError> {
    let mut weighted = 0.0;
    for chunk in windows.chunks(VALIDATION_BATCH) {
        let mut indices = Vec::with_capacity(chunk.len() * window);
        let mut targets = Vec::new();
        for &(i, s) in chunk {
            indices.extend(traces[i].window(window, s)?.indices);
            targets.extend(traces[i].label.as_f64());
        }
        let logits = model.logits(chunk.len(), window, &indices)?;
        let targets = Tensor::from_vec(logits.shape(), targets)?;
        weighted += sigmoid_ce_loss(&logits, &targets)?.0 * chunk.len() as f64;
    }
    Ok(weighted / windows.len() as f64)
}

/// One Adam update on a batch of windows; returns the batch loss.
fn lstm_step(
    model: &mut LstmClassifier,
    adam: &mut AdamState,
    batch: usize,
    steps: usize,
    indices: &[usize],
    targets: Vec<f64>,
    clip: Option<f64>,
) -> Result<f64, PipelineError> {
    let hidden = model.lstm.hidden();
    let input = LstmInput::OneHot { batch, steps, indices };
    let fwd = lstm_forward(&model.lstm, &input, None)?;
    let (logits, out_cache) = dense_forward(&model.out, &fwd.state.h, Activation::Identity)?;
    let targets = Tensor::from_vec(logits.shape(), targets)?;
    let (loss, d_logits) = sigmoid_ce_loss(&logits, &targets)?;
    let out_grads = dense_backward(&model.out, &out_cache, &d_logits)?;
    let mut d_outputs = Tensor::zeros(&[steps, batch, hidden]);
    d_outputs.data_mut()[(steps - 1) * batch * hidden..].copy_from_slice(out_grads.d_input.data());
    let g = lstm_backward(&model.lstm, &input, &fwd.cache, &d_outputs)?;
    let mut grads = [g.w_input, g.w_hidden, g.bias, out_grads.weight, out_grads.bias];
    if let Some(c) = clip {
        clip_global_norm(&mut grads.iter_mut().collect::<Vec<_>>(), c);
    }
    adam.step(
        &mut [&mut model.lstm.w_input, &mut model.lstm.w_hidden, &mut model.lstm.bias, &mut model.out.weight, &mut model.out.bias],
        &grads.iter().collect::<Vec<_>>(),
    )?;
    Ok(loss)
}

/// Trains the LSTM classifier on the dataset's train side.
///
/// Each step draws `batch_size` windows, each from a uniformly chosen
/// training trace at a uniformly chosen start. Every `eval_every` steps the
/// mean loss over a fixed set of held-out windows is computed; training
/// stops once it has failed to improve for `patience` consecutive
/// evaluations, or at `max_steps`.
pub fn train_lstm(
    dataset: &Dataset,
    spec: &LstmModelSpec,
    seed: u64,
    opts: TrainOptions<'_>,
) -> Result<TrainRun, PipelineError> {
    spec.validate()?;
    let traces: Vec<EncodedTrace> = dataset.encode(SplitSide::Train)?.into_iter().filter(|t| !t.is_empty()).collect();
    if traces.is_empty() {
        return Err(PipelineError::EmptyTrainSet);
    }
    let (fit, val) = validation_split(&traces, spec.validation_fraction, seed)?;
    let val_windows = validation_windows(&traces, &val, spec, seed);
    let mut meta = base_meta(dataset, ModelKind::Lstm, seed);
    meta.lstm = Some(spec.clone());

    let Restored { mut current, mut best, mut adam, mut state } = match opts.resume {
        Some(ckpt) => restore(ckpt, &meta, spec.lr)?,
        None => {
            let mut init = rng::stream(seed, "lstm_init", 0);
            let net = Network::Lstm(LstmClassifier::init(
                dataset.vocabulary().len(),
                spec.hidden,
                dataset.universe().len(),
                &mut init,
            ));
            let adam = AdamState::new(AdamConfig::with_lr(spec.lr), net.params().into_iter().map(|(_, t)| t));
            Restored { current: net, best: None, adam, state: TrainState::fresh() }
        }
    };
    let mut rng = sampling_stream(seed, "lstm_train", &state)?;
    let Network::Lstm(model) = &mut current else { unreachable!("lstm skeleton") };
    let (batch, window) = (spec.batch_size, spec.window);

    while state.finished.is_none() && opts.pause_after.is_none_or(|p| state.step < p) {
        let mut indices = Vec::with_capacity(batch * window);
        let mut targets = Vec::with_capacity(batch * dataset.universe().len());
        for _ in 0..batch {
            let t = &traces[fit[rng.gen_range(0..fit.len())]];
            let start = rng.gen_range(0..valid_starts(t.len(), window));
            indices.extend(t.window(window, start)?.indices);
            targets.extend(t.label.as_f64());
        }
        let loss = lstm_step(model, &mut adam, batch, window, &indices, targets, spec.clip_norm)?;
        state.step += 1;
        state.last_train_loss = Some(loss);
        if state.step % spec.eval_every == 0 {
            let vl = validation_loss(model, &traces, &val_windows, window)?;
            state.evaluations += 1;
            if state.best_val_loss.is_none_or(|b| vl < b) {
                state.best_val_loss = Some(vl);
                state.bad_evals = 0;
                best = Some(Network::Lstm(model.clone()));
            } else {
                state.bad_evals += 1;
            }
            log::info!(
                "step {} train loss {loss:.5} validation loss {vl:.5} (best {:.5}, {} without improvement)",
                state.step,
                state.best_val_loss.unwrap_or(vl),
                state.bad_evals
            );
            if state.bad_evals >= spec.patience {
                state.finished = Some(StopReason::EarlyStopping);
            }
        }
        if state.finished.is_none() && state.step >= spec.max_steps {
            state.finished = Some(StopReason::MaxSteps);
        }
    }
    state.rng_word_pos = rng.get_word_pos().to_string();
    state.adam_t = adam.t;
    meta.summary = summary(&state);
    let net = best.unwrap_or_else(|| current.clone());
    Ok(TrainRun { model: Model { meta, net }, current, adam, state })
}

struct FcCache {
    dense: Vec<crate::nn::DenseCache>,
    masks: Vec<Vec<f64>>,
}

fn fc_forward_train(
    model: &FcClassifier,
    x: &Tensor,
    rng: &mut impl Rng,
) -> Result<(Tensor, FcCache), PipelineError> {
    let last = model.layers.len() - 1;
    let mut h = x.clone();
    let mut cache = FcCache { dense: Vec::new(), masks: Vec::new() };
    for (i, layer) in model.layers.iter().enumerate() {
        let act = if i == last { Activation::Identity } else { Activation::Relu };
        let (y, c) = dense_forward(layer, &h, act)?;
        cache.dense.push(c);
        h = y;
        if i != last {
            let (y, mask) = dropout(&h, model.dropout, rng, true)?;
            cache.masks.push(mask);
            h = y;
        }
    }
    Ok((h, cache))
}

fn fc_step(
    model: &mut FcClassifier,
    adam: &mut AdamState,
    x: &Tensor,
    y: &Tensor,
    rng: &mut impl Rng,
) -> Result<f64, PipelineError> {
    let (logits, cache) = fc_forward_train(model, x, rng)?;
    let (loss, mut d) = sigmoid_ce_loss(&logits, y)?;
    let mut grads = Vec::with_capacity(2 * model.layers.len());
    for i in (0..model.layers.len()).rev() {
        if i != model.layers.len() - 1 {
            for (g, m) in d.data_mut().iter_mut().zip(&cache.masks[i]) {
                *g *= m;
            }
        }
        let g = dense_backward(&model.layers[i], &cache.dense[i], &d)?;
        grads.push(g.bias);
        grads.push(g.weight);
        d = g.d_input;
    }
    grads.reverse();
    let mut params: Vec<&mut Tensor> = model.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect();
    adam.step(&mut params, &grads.iter().collect::<Vec<_>>())?;
    Ok(loss)
}

/// Trains the fully-connected baseline on frequency vectors of the train
/// traces for exactly `epochs` epochs with dropout active.
pub fn train_fc(
    dataset: &Dataset,
    spec: &FcModelSpec,
    seed: u64,
    opts: TrainOptions<'_>,
) -> Result<TrainRun, PipelineError> {
    spec.validate()?;
    let traces = dataset.encode(SplitSide::Train)?;
    if traces.is_empty() {
        return Err(PipelineError::EmptyTrainSet);
    }
    let (v, n) = (dataset.vocabulary().len(), dataset.universe().len());
    let features: Vec<Vec<f64>> =
        traces.iter().map(|t| t.frequency(v).counts.iter().map(|&c| c as f64).collect()).collect();
    let labels: Vec<Vec<f64>> = traces.iter().map(|t| t.label.as_f64()).collect();
    let mut meta = base_meta(dataset, ModelKind::Fc, seed);
    meta.fc = Some(spec.clone());

    let Restored { mut current, adam: mut adam_state, mut state, .. } = match opts.resume {
        Some(ckpt) => restore(ckpt, &meta, spec.lr)?,
        None => {
            let mut init = rng::stream(seed, "fc_init", 0);
            let net = Network::Fc(FcClassifier::init(v, &spec.hidden, n, spec.dropout, &mut init));
            let adam = AdamState::new(AdamConfig::with_lr(spec.lr), net.params().into_iter().map(|(_, t)| t));
            Restored { current: net, best: None, adam, state: TrainState::fresh() }
        }
    };
    let mut rng = sampling_stream(seed, "fc_train", &state)?;
    let Network::Fc(model) = &mut current else { unreachable!("fc skeleton") };
    let batch = spec.batch_size.unwrap_or(traces.len()).min(traces.len());
    let mut order: Vec<usize> = (0..traces.len()).collect();

    while state.epoch < spec.epochs && opts.pause_after.is_none_or(|p| state.epoch < p) {
        order.sort_unstable();
        if batch < traces.len() {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let x = Tensor::from_vec(&[chunk.len(), v], chunk.iter().flat_map(|&i| features[i].iter().copied()).collect())?;
            let y = Tensor::from_vec(&[chunk.len(), n], chunk.iter().flat_map(|&i| labels[i].iter().copied()).collect())?;
            epoch_loss += fc_step(model, &mut adam_state, &x, &y, &mut rng)? * chunk.len() as f64;
            state.step += 1;
        }
        state.epoch += 1;
        state.last_train_loss = Some(epoch_loss / traces.len() as f64);
        log::debug!("epoch {} train loss {:.5}", state.epoch, epoch_loss / traces.len() as f64);
    }
    if state.epoch >= spec.epochs {
        state.finished = Some(StopReason::Epochs);
    }
    state.rng_word_pos = rng.get_word_pos().to_string();
    state.adam_t = adam_state.t;
    meta.summary = summary(&state);
    let model = Model { meta, net: current.clone() };
    Ok(TrainRun { model, current, adam: adam_state, state })
}

/// Dispatches on the kind recorded in a resumable checkpoint.
pub fn resume_meta(ckpt: &Checkpoint) -> Result<ModelMeta, PipelineError> {
    Ok(Model::from_checkpoint(ckpt)?.meta)
}
