use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{decide, empty_window, Model, ModelKind};
use super::PipelineError;
use crate::corpus::{valid_starts, Dataset, EncodedTrace, SplitSide, Vocabulary, WebsiteUniverse};
use crate::trace::Trace;

/// Binary confusion counts over label slots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTotals {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionTotals {
    pub fn record(&mut self, truth: bool, decision: bool) {
        match (truth, decision) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionTotals) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `(TP + TN) / (TP + FP + TN + FN)`.
    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// `num / den`, with 0/0 defined as 0.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub site: String,
    pub totals: ConfusionTotals,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Metrics for one way of grouping predictions into samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub samples: u64,
    pub totals: ConfusionTotals,
    pub accuracy: f64,
    /// Sum over samples of |decision ∧ truth|.
    pub labels_recovered: u64,
    pub mean_labels_recovered: f64,
    pub mean_label_size: f64,
    pub per_class: Vec<ClassMetrics>,
}

impl SampleMetrics {
    fn from_decisions<'a>(
        universe: &WebsiteUniverse,
        pairs: impl IntoIterator<Item = (&'a [bool], &'a [bool])>,
    ) -> Self {
        let n = universe.len();
        let mut per = vec![ConfusionTotals::default(); n];
        let (mut samples, mut recovered, mut label_slots) = (0u64, 0u64, 0u64);
        for (truth, decision) in pairs {
            samples += 1;
            for i in 0..n {
                per[i].record(truth[i], decision[i]);
                recovered += (truth[i] && decision[i]) as u64;
                label_slots += truth[i] as u64;
            }
        }
        let mut totals = ConfusionTotals::default();
        per.iter().for_each(|c| totals.merge(c));
        let per_class = per
            .into_iter()
            .zip(universe.sites())
            .map(|(c, site)| ClassMetrics {
                site: site.clone(),
                totals: c,
                recall: c.recall(),
                precision: c.precision(),
                f1: c.f1(),
                accuracy: c.accuracy(),
            })
            .collect();
        SampleMetrics {
            samples,
            totals,
            accuracy: totals.accuracy(),
            labels_recovered: recovered,
            mean_labels_recovered: ratio(recovered, samples),
            mean_label_size: ratio(label_slots, samples),
            per_class,
        }
    }
}

/// Headline numbers are per sample: per window for the LSTM, per trace for
/// the fully-connected model. `trace_aggregate` scores each trace once by
/// averaging its window probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub threshold: f64,
    pub window: Option<usize>,
    pub traces: u64,
    pub scrubbed: bool,
    #[serde(flatten)]
    pub samples: SampleMetrics,
    pub trace_aggregate: SampleMetrics,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        self.samples.accuracy
    }

    pub fn per_class(&self) -> &[ClassMetrics] {
        &self.samples.per_class
    }

    pub fn class_accuracies(&self) -> Vec<f64> {
        self.samples.per_class.iter().map(|c| c.accuracy).collect()
    }

    pub fn write_json(&self, path: &Path) -> Result<(), PipelineError> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self, PipelineError> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    /// One row per class.
    pub fn write_csv(&self, path: &Path) -> Result<(), PipelineError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "site,recall,precision,f1,accuracy,tp,fp,tn,fn")?;
        for c in &self.samples.per_class {
            let t = c.totals;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                c.site, c.recall, c.precision, c.f1, c.accuracy, t.tp, t.fp, t.tn, t.fn_
            )?;
        }
        Ok(())
    }
}

/// One scored sample, for independent auditing of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub trace_id: usize,
    /// Window start; absent for frequency samples.
    pub start: Option<usize>,
    pub probabilities: Vec<f64>,
    /// Indices of the positive sites.
    pub decision: Vec<usize>,
    pub truth: Vec<usize>,
}

fn positives(bits: &[bool]) -> Vec<usize> {
    bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

pub fn bits_of(indices: &[usize], n: usize) -> Vec<bool> {
    let mut bits = vec![false; n];
    for &i in indices {
        if i < n {
            bits[i] = true;
        }
    }
    bits
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, PipelineError> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Overrides the threshold stored with the model.
    pub threshold: Option<f64>,
    /// Windows per forward pass.
    pub batch: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { threshold: None, batch: 256 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    /// Sorted by trace id, then window start.
    pub predictions: Vec<PredictionRecord>,
}

fn score_trace(
    model: &Model,
    trace: &EncodedTrace,
    threshold: f64,
    batch: usize,
) -> Result<Vec<PredictionRecord>, PipelineError> {
    let truth = positives(trace.label.bits());
    let record = |start, probabilities: Vec<f64>| PredictionRecord {
        trace_id: trace.id,
        start,
        decision: positives(decide(&probabilities, threshold).bits()),
        probabilities,
        truth: truth.clone(),
    };
    match model.window() {
        Some(window) => {
            let starts = valid_starts(trace.len(), window);
            let mut out = Vec::with_capacity(starts);
            let all: Vec<usize> = (0..starts).collect();
            for chunk in all.chunks(batch.max(1)) {
                let mut indices = Vec::with_capacity(chunk.len() * window);
                for &s in chunk {
                    if trace.is_empty() {
                        indices.extend(empty_window(window));
                    } else {
                        indices.extend(trace.window(window, s)?.indices);
                    }
                }
                for (&s, p) in chunk.iter().zip(model.window_probabilities(chunk.len(), &indices)?) {
                    out.push(record(Some(s), p));
                }
            }
            Ok(out)
        }
        None => {
            let counts = trace.frequency(model.meta.vocabulary_size).counts;
            let p = model.frequency_probabilities(&[&counts])?.remove(0);
            Ok(vec![record(None, p)])
        }
    }
}

/// Scores every sample of the given traces and tallies the metrics.
pub fn evaluate(
    model: &Model,
    vocabulary: &Vocabulary,
    universe: &WebsiteUniverse,
    traces: &[(usize, &Trace)],
    opts: &EvalOptions,
) -> Result<Evaluation, PipelineError> {
    if traces.is_empty() {
        return Err(PipelineError::EmptySet);
    }
    model.meta.check_vocabulary(vocabulary)?;
    model.meta.check_universe(universe)?;
    let threshold = opts.threshold.unwrap_or_else(|| model.meta.threshold());
    let mut encoded = traces
        .iter()
        .map(|&(id, t)| EncodedTrace::new(id, t, vocabulary, universe))
        .collect::<Result<Vec<_>, _>>()?;
    encoded.sort_by_key(|t| t.id);
    let per_trace: Vec<Vec<PredictionRecord>> =
        encoded.par_iter().map(|t| score_trace(model, t, threshold, opts.batch)).collect::<Result<_, _>>()?;

    let n = universe.len();
    let sample_bits: Vec<(Vec<bool>, Vec<bool>)> =
        per_trace.iter().flatten().map(|r| (bits_of(&r.truth, n), bits_of(&r.decision, n))).collect();
    let samples = SampleMetrics::from_decisions(universe, sample_bits.iter().map(|(t, d)| (&t[..], &d[..])));

    let trace_bits: Vec<(Vec<bool>, Vec<bool>)> = per_trace
        .iter()
        .zip(&encoded)
        .map(|(records, t)| {
            let mut mean = vec![0.0; n];
            for r in records {
                for (m, p) in mean.iter_mut().zip(&r.probabilities) {
                    *m += p;
                }
            }
            mean.iter_mut().for_each(|m| *m /= records.len() as f64);
            (t.label.bits().to_vec(), decide(&mean, threshold).bits().to_vec())
        })
        .collect();
    let trace_aggregate = SampleMetrics::from_decisions(universe, trace_bits.iter().map(|(t, d)| (&t[..], &d[..])));

    let report = EvalReport {
        model: model.meta.kind,
        threshold,
        window: model.window(),
        traces: encoded.len() as u64,
        scrubbed: false,
        samples,
        trace_aggregate,
    };
    Ok(Evaluation { report, predictions: per_trace.into_iter().flatten().collect() })
}

/// [`evaluate`] on one side of a dataset's split.
pub fn evaluate_dataset(
    model: &Model,
    dataset: &Dataset,
    side: SplitSide,
    opts: &EvalOptions,
) -> Result<Evaluation, PipelineError> {
    evaluate(model, dataset.vocabulary(), dataset.universe(), &dataset.traces_of(side), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_rates() {
        let c = ConfusionTotals { tp: 3, fp: 1, tn: 5, fn_: 1 };
        assert_eq!(c.accuracy(), 0.8);
        assert_eq!(c.recall(), 0.75);
        assert_eq!(c.precision(), 0.75);
        assert!((c.f1() - 0.75).abs() < 1e-15);
        let z = ConfusionTotals { tp: 0, fp: 0, tn: 4, fn_: 0 };
        assert_eq!((z.recall(), z.precision(), z.f1(), z.accuracy()), (0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn all_negative_on_triples_is_085() {
        let u = WebsiteUniverse::default_sites();
        let truth: Vec<Vec<bool>> = (0..20)
            .map(|k| (0..20).map(|i| i == k || i == (k + 1) % 20 || i == (k + 5) % 20).collect())
            .collect();
        let none = vec![false; 20];
        let m = SampleMetrics::from_decisions(&u, truth.iter().map(|t| (&t[..], &none[..])));
        assert_eq!(m.accuracy, 17.0 / 20.0);
        assert!(m.per_class.iter().all(|c| c.recall == 0.0));
        assert_eq!(m.mean_labels_recovered, 0.0);
        assert_eq!(m.mean_label_size, 3.0);
    }

    #[test]
    fn csv_has_one_row_per_class() {
        let u = WebsiteUniverse::default_sites();
        let t = vec![true; 20];
        let m = SampleMetrics::from_decisions(&u, [(&t[..], &t[..])]);
        let report = EvalReport {
            model: ModelKind::Fc,
            threshold: 0.5,
            window: None,
            traces: 1,
            scrubbed: false,
            samples: m.clone(),
            trace_aggregate: m,
        };
        let mut out = Vec::new();
        report.write_csv_to(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 21);
        assert!(text.lines().nth(1).unwrap().starts_with("imdb.com,1,1,1,1,1,0,0,0"));
        let back: EvalReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        assert_eq!(back, report);
    }
}
