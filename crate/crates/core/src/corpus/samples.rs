use serde::{Deserialize, Serialize};

use super::{CorpusError, LabelVector, Vocabulary, WebsiteUniverse, OOV_INDEX};
use crate::trace::Trace;

/// Fixed-length run of encoded server names, the LSTM's unit of input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub indices: Vec<usize>,
    pub label: LabelVector,
    pub trace_id: usize,
    pub start: usize,
    /// The trace ran out before `start + T`; the tail is OOV.
    pub padded: bool,
}

/// Order-free name counts of a whole trace, the fully-connected model's
/// input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencySample {
    pub counts: Vec<u32>,
    pub label: LabelVector,
    pub trace_id: usize,
}

/// A trace with its names encoded once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedTrace {
    pub id: usize,
    pub indices: Vec<usize>,
    pub label: LabelVector,
}

impl EncodedTrace {
    pub fn new(id: usize, trace: &Trace, vocab: &Vocabulary, universe: &WebsiteUniverse) -> Result<Self, CorpusError> {
        Ok(EncodedTrace {
            id,
            indices: trace.names().map(|n| vocab.encode(n)).collect(),
            label: universe.label_vector(&trace.label)?,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Events `[start, start + window)`, OOV-padded past the end.
    pub fn window(&self, window: usize, start: usize) -> Result<SequenceSample, CorpusError> {
        if window == 0 {
            return Err(CorpusError::ZeroWindow);
        }
        if self.indices.is_empty() {
            return Err(CorpusError::EmptyTrace);
        }
        if start >= self.indices.len() {
            return Err(CorpusError::StartBeyondTrace { start, len: self.indices.len() });
        }
        let end = (start + window).min(self.indices.len());
        let mut indices = self.indices[start..end].to_vec();
        let padded = indices.len() < window;
        indices.resize(window, OOV_INDEX);
        Ok(SequenceSample { indices, label: self.label.clone(), trace_id: self.id, start, padded })
    }

    /// All stride-1 windows (a single padded one for short traces).
    pub fn windows(&self, window: usize) -> Result<Vec<SequenceSample>, CorpusError> {
        (0..valid_starts(self.len(), window)).map(|s| self.window(window, s)).collect()
    }

    pub fn frequency(&self, vocab_len: usize) -> FrequencySample {
        let mut counts = vec![0u32; vocab_len];
        for &i in &self.indices {
            counts[i] += 1;
        }
        FrequencySample { counts, label: self.label.clone(), trace_id: self.id }
    }
}

/// Number of window starts for a trace of `len` events: `len − T + 1`, or
/// one padded window when the trace is shorter than `T`.
pub fn valid_starts(len: usize, window: usize) -> usize {
    if len >= window {
        len - window + 1
    } else {
        1
    }
}

pub fn window_samples(
    trace: &Trace,
    vocab: &Vocabulary,
    universe: &WebsiteUniverse,
    window: usize,
    start: usize,
) -> Result<SequenceSample, CorpusError> {
    EncodedTrace::new(0, trace, vocab, universe)?.window(window, start)
}

/// Raw occurrence counts; unseen names accumulate in slot 0.
pub fn frequency_vector(trace: &Trace, vocab: &Vocabulary) -> Vec<u32> {
    let mut counts = vec![0u32; vocab.len()];
    for name in trace.names() {
        counts[vocab.encode(name)] += 1;
    }
    counts
}
