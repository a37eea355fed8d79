//! Synthetic traces with known ground truth.
//!
//! Each site owns a profile: first-party name templates plus weighted
//! third-party names. A page visit is a burst of names drawn from the
//! profile; a trace interleaves several page visits of every labeled site.
//! Traces can be written as JSONL (with a per-event truth sidecar) or
//! re-encoded as pcap to exercise the extractor end to end.

mod emit;
mod generate;
mod profile;

use thiserror::Error;

pub use emit::{client_hello, emit_pcap, emit_pcap_grouped, handshake_record, pcap_header, pcap_record, tcp_frame};
pub use generate::{generate_corpus, generate_trace, write_corpus, SynthTrace, TRUTH_FILE};
pub use profile::{
    order_profiles, sampled_profiles, BurstModel, Interleave, Preset, ProfileShape, SiteProfile, SynthConfig,
    WeightedName,
};

use crate::corpus::{pair_cover_triples, random_triples, triple_sites, CorpusError, WebsiteUniverse};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("site {0:?} has no profile")]
    UnknownSite(String),
    #[error("bad synthetic config: {0}")]
    BadConfig(String),
    #[error("no labels to generate")]
    EmptyLabels,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Which website sets to generate traces for.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelPlan {
    /// Triples covering every pair of sites.
    Cover,
    /// Uniformly drawn distinct triples.
    Random { count: usize },
    Explicit(Vec<Vec<String>>),
}

impl LabelPlan {
    pub fn labels(&self, universe: &WebsiteUniverse, seed: u64) -> Result<Vec<Vec<String>>, SynthError> {
        let labels = match self {
            LabelPlan::Cover => pair_cover_triples(universe)?.iter().map(|t| triple_sites(universe, t)).collect(),
            LabelPlan::Random { count } => {
                random_triples(universe, *count, seed)?.iter().map(|t| triple_sites(universe, t)).collect()
            }
            LabelPlan::Explicit(l) => l.clone(),
        };
        if labels.is_empty() {
            return Err(SynthError::EmptyLabels);
        }
        Ok(labels)
    }
}

impl SynthTrace {
    /// pcap bytes with one TCP connection per page visit.
    pub fn to_pcap(&self) -> Vec<u8> {
        emit_pcap_grouped(&self.trace, &self.bursts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plans() {
        let u = WebsiteUniverse::default_sites();
        let cover = LabelPlan::Cover.labels(&u, 0).unwrap();
        assert!(cover.iter().all(|l| l.len() == 3));
        assert_eq!(LabelPlan::Random { count: 7 }.labels(&u, 1).unwrap().len(), 7);
        assert!(matches!(LabelPlan::Explicit(vec![]).labels(&u, 0), Err(SynthError::EmptyLabels)));
    }
}
