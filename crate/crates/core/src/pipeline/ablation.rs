use serde::{Deserialize, Serialize};

use super::eval::{evaluate, EvalOptions, EvalReport, Evaluation};
use super::model::Model;
use super::stats::{paired_t_test, TTest};
use super::PipelineError;
use crate::corpus::{scrub, Vocabulary, WebsiteUniverse};
use crate::trace::Trace;

/// Scrubbed against unscrubbed evaluation of the same traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub unscrubbed: EvalReport,
    pub scrubbed: EvalReport,
    /// Scrubbed minus unscrubbed accuracy.
    pub accuracy_delta: f64,
    pub per_class_delta: Vec<(String, f64)>,
    pub events_before: u64,
    pub events_removed: u64,
}

/// Drops every event whose name contains a site id, then evaluates both
/// versions of the traces.
pub fn ablate_scrub(
    model: &Model,
    vocabulary: &Vocabulary,
    universe: &WebsiteUniverse,
    traces: &[(usize, &Trace)],
    opts: &EvalOptions,
) -> Result<(AblationReport, Evaluation), PipelineError> {
    let before = evaluate(model, vocabulary, universe, traces, opts)?;
    let scrubbed_traces: Vec<(usize, Trace)> = traces.iter().map(|&(id, t)| (id, scrub(t, universe))).collect();
    let refs: Vec<(usize, &Trace)> = scrubbed_traces.iter().map(|(id, t)| (*id, t)).collect();
    let mut after = evaluate(model, vocabulary, universe, &refs, opts)?;
    after.report.scrubbed = true;
    let events_before: u64 = traces.iter().map(|(_, t)| t.len() as u64).sum();
    let events_after: u64 = refs.iter().map(|(_, t)| t.len() as u64).sum();
    let per_class_delta = after
        .report
        .per_class()
        .iter()
        .zip(before.report.per_class())
        .map(|(a, b)| (a.site.clone(), a.accuracy - b.accuracy))
        .collect();
    let report = AblationReport {
        accuracy_delta: after.report.accuracy() - before.report.accuracy(),
        per_class_delta,
        unscrubbed: before.report,
        scrubbed: after.report.clone(),
        events_before,
        events_removed: events_before - events_after,
    };
    Ok((report, after))
}

/// Per-class accuracy comparison of two reports over the same classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub classes: Vec<String>,
    pub a_accuracy: Vec<f64>,
    pub b_accuracy: Vec<f64>,
    pub a_overall: f64,
    pub b_overall: f64,
    pub test: TTest,
}

pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> Result<Comparison, PipelineError> {
    let classes: Vec<String> = a.per_class().iter().map(|c| c.site.clone()).collect();
    let other: Vec<&str> = b.per_class().iter().map(|c| c.site.as_str()).collect();
    if classes.iter().map(String::as_str).ne(other.iter().copied()) {
        return Err(PipelineError::ClassMismatch);
    }
    let (a_accuracy, b_accuracy) = (a.class_accuracies(), b.class_accuracies());
    let test = paired_t_test(&a_accuracy, &b_accuracy)?;
    Ok(Comparison { classes, a_accuracy, b_accuracy, a_overall: a.accuracy(), b_overall: b.accuracy(), test })
}
