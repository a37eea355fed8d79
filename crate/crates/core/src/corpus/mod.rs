//! Labeled datasets built from traces: the website universe, label covers,
//! the server-name vocabulary, window and frequency samples, the stratified
//! split and the scrub ablation.

mod cover;
mod dataset;
mod samples;
mod scrub;
mod split;
mod universe;
mod vocab;

use thiserror::Error;

pub use cover::{binomial, pair_cover_triples, random_triples, triple_sites, Triple};
pub use dataset::{Dataset, DatasetManifest, SplitSide, FREQUENCIES_FILE, MANIFEST_FILE, TRACES_FILE};
pub use samples::{frequency_vector, valid_starts, window_samples, EncodedTrace, FrequencySample, SequenceSample};
pub use scrub::scrub;
pub use split::{split, split_by_key, Split};
pub use universe::{LabelVector, WebsiteUniverse, DEFAULT_SITES};
pub use vocab::{Vocabulary, OOV_INDEX, OOV_TOKEN};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("universe has no sites")]
    EmptyUniverse,
    #[error("universe has {0} sites; at least 3 are needed")]
    UniverseTooSmall(usize),
    #[error("requested {requested} triples but only {available} exist")]
    CountTooLarge { requested: usize, available: u64 },
    #[error("no traces to build a vocabulary from")]
    EmptyCorpus,
    #[error("trace has no events")]
    EmptyTrace,
    #[error("window start {start} is beyond a trace of {len} events")]
    StartBeyondTrace { start: usize, len: usize },
    #[error("window length must be at least 1")]
    ZeroWindow,
    #[error("train fraction {0} is not in (0, 1)")]
    BadFraction(f64),
    #[error("site {0:?} is not in the universe")]
    UnknownSite(String),
    #[error("duplicate site {0:?} in universe")]
    DuplicateSite(String),
    #[error("bad site id {0:?}: must be non-empty lowercase without whitespace")]
    BadSiteId(String),
    #[error("labels must name 1 to 4 sites, got {0}")]
    BadLabelSize(usize),
    #[error("bad universe file: {0}")]
    BadUniverseFile(String),
    #[error("bad vocabulary: {0}")]
    BadVocabulary(String),
    #[error("bad dataset manifest: {0}")]
    BadManifest(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    TraceFile(#[from] crate::trace::TraceFileError),
}
