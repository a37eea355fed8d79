use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{split, CorpusError, EncodedTrace, Split, Vocabulary, WebsiteUniverse};
use crate::trace::{read_traces, write_traces, Trace};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRACES_FILE: &str = "traces.jsonl";
pub const FREQUENCIES_FILE: &str = "frequencies.csv";

/// On-disk description of a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub toolkit_version: String,
    pub universe: WebsiteUniverse,
    pub seed: u64,
    pub window: usize,
    pub train_fraction: f64,
    /// Trace JSONL files relative to the manifest; trace ids count lines
    /// across the files in this order.
    pub trace_files: Vec<String>,
    pub split: Split,
    /// Index → server name; index 0 is the OOV slot.
    pub vocabulary: Vocabulary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub traces: Vec<Trace>,
}

impl Dataset {
    /// Splits the traces and builds the vocabulary from the train side.
    pub fn build(
        traces: Vec<Trace>,
        universe: WebsiteUniverse,
        window: usize,
        train_fraction: f64,
        seed: u64,
    ) -> Result<Self, CorpusError> {
        if window == 0 {
            return Err(CorpusError::ZeroWindow);
        }
        for t in &traces {
            universe.label_vector(&t.label)?;
        }
        let split = split(&traces, train_fraction, seed)?;
        let vocabulary = Vocabulary::build(split.train.iter().map(|&i| &traces[i]))?;
        Ok(Dataset {
            manifest: DatasetManifest {
                toolkit_version: crate::VERSION.to_string(),
                universe,
                seed,
                window,
                train_fraction,
                trace_files: vec![TRACES_FILE.to_string()],
                split,
                vocabulary,
            },
            traces,
        })
    }

    pub fn universe(&self) -> &WebsiteUniverse {
        &self.manifest.universe
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.manifest.vocabulary
    }

    pub fn ids(&self, side: SplitSide) -> Vec<usize> {
        match side {
            SplitSide::Train => self.manifest.split.train.clone(),
            SplitSide::Test => self.manifest.split.test.clone(),
            SplitSide::All => (0..self.traces.len()).collect(),
        }
    }

    pub fn traces_of(&self, side: SplitSide) -> Vec<(usize, &Trace)> {
        self.ids(side).into_iter().map(|i| (i, &self.traces[i])).collect()
    }

    pub fn encode(&self, side: SplitSide) -> Result<Vec<EncodedTrace>, CorpusError> {
        self.ids(side)
            .into_iter()
            .map(|i| EncodedTrace::new(i, &self.traces[i], self.vocabulary(), self.universe()))
            .collect()
    }

    /// Writes `traces.jsonl`, `manifest.json` and `frequencies.csv`.
    pub fn save(&self, dir: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(dir)?;
        let mut manifest = self.manifest.clone();
        manifest.trace_files = vec![TRACES_FILE.to_string()];
        write_traces(&dir.join(TRACES_FILE), &self.traces)?;
        let f = BufWriter::new(File::create(dir.join(MANIFEST_FILE))?);
        serde_json::to_writer_pretty(f, &manifest)?;
        self.write_frequency_csv(&dir.join(FREQUENCIES_FILE))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)?;
        let mut traces = Vec::new();
        for f in &manifest.trace_files {
            let path: PathBuf = dir.join(f);
            traces.extend(read_traces(&path)?);
        }
        let n = traces.len();
        if let Some(&bad) = manifest.split.train.iter().chain(&manifest.split.test).find(|&&i| i >= n) {
            return Err(CorpusError::BadManifest(format!("split references trace {bad} of {n}")));
        }
        Ok(Dataset { manifest, traces })
    }

    /// One row per trace: id, split side, `|`-joined label, then one count
    /// column per vocabulary entry.
    pub fn write_frequency_csv(&self, path: &Path) -> Result<(), CorpusError> {
        let mut w = BufWriter::new(File::create(path)?);
        write!(w, "trace_id,split,label")?;
        for name in self.vocabulary().names() {
            write!(w, ",{}", csv_field(name))?;
        }
        writeln!(w)?;
        let mut side = vec!["unassigned"; self.traces.len()];
        for &i in &self.manifest.split.train {
            side[i] = "train";
        }
        for &i in &self.manifest.split.test {
            side[i] = "test";
        }
        for (id, trace) in self.traces.iter().enumerate() {
            let counts = super::frequency_vector(trace, self.vocabulary());
            write!(w, "{id},{},{}", side[id], csv_field(&trace.label.join("|")))?;
            for c in counts {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitSide {
    Train,
    Test,
    All,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{TlsVersion, TraceEvent};

    fn traces() -> Vec<Trace> {
        (0..12)
            .map(|i| {
                let site = ["a.com", "b.com", "c.com"][i % 3];
                Trace {
                    label: vec![site.to_string()],
                    events: (0..4)
                        .map(|k| TraceEvent { sni: format!("x{k}.{site}"), ts: k as f64, ver: TlsVersion::Tls12 })
                        .collect(),
                }
            })
            .collect()
    }

    #[test]
    fn save_and_load_round_trip() {
        let u = WebsiteUniverse::new(["a.com", "b.com", "c.com"]).unwrap();
        let ds = Dataset::build(traces(), u, 3, 0.75, 5).unwrap();
        assert_eq!(ds.manifest.split.train.len(), 9);
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!(back, ds);
        let csv = std::fs::read_to_string(dir.path().join(FREQUENCIES_FILE)).unwrap();
        assert_eq!(csv.lines().count(), 13);
        assert!(csv.starts_with("trace_id,split,label,<oov>,"));
    }

    #[test]
    fn vocabulary_comes_from_train_only() {
        let u = WebsiteUniverse::new(["a.com", "b.com", "c.com"]).unwrap();
        let mut ts = traces();
        ts[0].events[0].sni = "only-here.a.com".into();
        let ds = Dataset::build(ts, u, 3, 0.75, 5).unwrap();
        let in_vocab = ds.vocabulary().encode("only-here.a.com") != 0;
        assert_eq!(in_vocab, ds.manifest.split.train.contains(&0));
    }

    #[test]
    fn rejects_labels_outside_universe() {
        let u = WebsiteUniverse::new(["a.com", "b.com"]).unwrap();
        assert!(matches!(Dataset::build(traces(), u, 3, 0.75, 5), Err(CorpusError::UnknownSite(_))));
    }
}
