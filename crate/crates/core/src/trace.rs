//! The trace file: one labeled, chronological list of server names per line.
//!
//! ```text
//! {"label": ["ebay.com", "github.com"], "events": [{"sni": "www.ebay.com", "ts": 1600000000.25, "ver": "1.3"}]}
//! ```
//!
//! Every downstream stage (corpus, training, evaluation) reads this format.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Negotiable TLS version of a ClientHello that survived the version filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TlsVersion {
    #[serde(rename = "1.2")]
    Tls12,
    #[serde(rename = "1.3")]
    Tls13,
}

impl TlsVersion {
    pub fn as_str(self) -> &'static str {
        match self {
            TlsVersion::Tls12 => "1.2",
            TlsVersion::Tls13 => "1.3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub sni: String,
    /// Capture time in seconds.
    pub ts: f64,
    pub ver: TlsVersion,
}

/// One capture reduced to its server names, with the set of websites that
/// generated it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub label: Vec<String>,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.events.iter().map(|e| e.sni.as_str())
    }

    /// Sorted, deduplicated label; used as the stratification key.
    pub fn label_key(&self) -> Vec<String> {
        let mut key = self.label.clone();
        key.sort();
        key.dedup();
        key
    }
}

#[derive(Debug, Error)]
pub enum TraceFileError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: events are not sorted by timestamp")]
    Unsorted { line: usize },
}

/// Parses trace JSONL from any reader. Blank lines are ignored.
pub fn read_traces_from<R: BufRead>(reader: R) -> Result<Vec<Trace>, TraceFileError> {
    let mut traces = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trace: Trace =
            serde_json::from_str(&line).map_err(|source| TraceFileError::Json { line: i + 1, source })?;
        if trace.events.windows(2).any(|w| w[1].ts < w[0].ts) {
            return Err(TraceFileError::Unsorted { line: i + 1 });
        }
        traces.push(trace);
    }
    Ok(traces)
}

pub fn read_traces(path: &Path) -> Result<Vec<Trace>, TraceFileError> {
    read_traces_from(BufReader::new(File::open(path)?))
}

pub fn write_traces_to<W: Write>(mut writer: W, traces: &[Trace]) -> io::Result<()> {
    for trace in traces {
        serde_json::to_writer(&mut writer, trace)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn write_traces(path: &Path, traces: &[Trace]) -> io::Result<()> {
    write_traces_to(BufWriter::new(File::create(path)?), traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format_matches_documented_shape() {
        let trace = Trace {
            label: vec!["ebay.com".into()],
            events: vec![TraceEvent { sni: "www.ebay.com".into(), ts: 1.5, ver: TlsVersion::Tls13 }],
        };
        let json = serde_json::to_string(&trace).unwrap();
        assert_eq!(json, r#"{"label":["ebay.com"],"events":[{"sni":"www.ebay.com","ts":1.5,"ver":"1.3"}]}"#);
    }

    #[test]
    fn rejects_unsorted_events() {
        let text = r#"{"label":[],"events":[{"sni":"a","ts":2.0,"ver":"1.2"},{"sni":"b","ts":1.0,"ver":"1.2"}]}"#;
        assert!(matches!(read_traces_from(text.as_bytes()), Err(TraceFileError::Unsorted { line: 1 })));
    }

    #[test]
    fn round_trips_through_jsonl() {
        let traces = vec![
            Trace::default(),
            Trace {
                label: vec!["a.com".into(), "b.com".into()],
                events: vec![
                    TraceEvent { sni: "x.a.com".into(), ts: 1600000000.000001, ver: TlsVersion::Tls12 },
                    TraceEvent { sni: "y.b.com".into(), ts: 1600000000.25, ver: TlsVersion::Tls13 },
                ],
            },
        ];
        let mut buf = Vec::new();
        write_traces_to(&mut buf, &traces).unwrap();
        assert_eq!(read_traces_from(buf.as_slice()).unwrap(), traces);
    }
}
