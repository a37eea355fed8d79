use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CorpusError;
use crate::trace::Trace;

pub const OOV_INDEX: usize = 0;
pub const OOV_TOKEN: &str = "<oov>";

/// Server name ↔ dense index. Index 0 is reserved for names never seen in
/// training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Orders names by the earliest position at which they occur in any
    /// trace, ties broken lexicographically, so the result does not depend
    /// on the order of the traces.
    pub fn build<'a>(traces: impl IntoIterator<Item = &'a Trace>) -> Result<Self, CorpusError> {
        let mut first_pos: HashMap<&str, usize> = HashMap::new();
        let mut any = false;
        for trace in traces {
            any = true;
            for (pos, name) in trace.names().enumerate() {
                first_pos.entry(name).and_modify(|p| *p = (*p).min(pos)).or_insert(pos);
            }
        }
        if !any {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut ordered: Vec<(&str, usize)> = first_pos.into_iter().collect();
        ordered.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));
        Self::from_names(ordered.into_iter().map(|(n, _)| n.to_string()))
    }

    /// Builds from the non-OOV names in index order (index 1 first).
    pub fn from_names(names: impl IntoIterator<Item = String>) -> Result<Self, CorpusError> {
        let mut all = vec![OOV_TOKEN.to_string()];
        all.extend(names);
        Self::try_from(all)
    }

    /// Size including the OOV slot.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.len() <= 1
    }

    pub fn encode(&self, name: &str) -> usize {
        self.index.get(name).copied().unwrap_or(OOV_INDEX)
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// SHA-256 over the index order; checkpoints record it so a model is
    /// never fed a differently numbered encoding.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for n in &self.names {
            h.update(n.as_bytes());
            h.update([0u8]);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = CorpusError;

    /// The first entry is the OOV slot.
    fn try_from(names: Vec<String>) -> Result<Self, Self::Error> {
        if names.first().map(String::as_str) != Some(OOV_TOKEN) {
            return Err(CorpusError::BadVocabulary("index 0 must be the OOV token".into()));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate().skip(1) {
            if index.insert(n.clone(), i).is_some() {
                return Err(CorpusError::BadVocabulary(format!("duplicate name {n}")));
            }
        }
        Ok(Vocabulary { names, index })
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.names
    }
}
