use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// The twenty monitored websites of the reference setup, in slot order.
pub const DEFAULT_SITES: [&str; 20] = [
    "imdb.com",
    "github.com",
    "stackoverflow.com",
    "samsung.com",
    "pinterest.com",
    "linkedin.com",
    "soundcloud.com",
    "instagram.com",
    "java.com",
    "gitlab.com",
    "quora.com",
    "spotify.com",
    "oracle.com",
    "ebay.com",
    "en.wikipedia.org",
    "reddit.com",
    "twitter.com",
    "youtube.com",
    "facebook.com",
    "netflix.com",
];

/// Ordered set of monitored websites; the order fixes label slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct WebsiteUniverse {
    sites: Vec<String>,
}

impl WebsiteUniverse {
    pub fn new<S: Into<String>>(sites: impl IntoIterator<Item = S>) -> Result<Self, CorpusError> {
        let sites: Vec<String> = sites.into_iter().map(Into::into).collect();
        if sites.is_empty() {
            return Err(CorpusError::EmptyUniverse);
        }
        let mut seen = HashSet::new();
        for s in &sites {
            if s.is_empty() || s.chars().any(|c| c.is_ascii_uppercase() || c.is_whitespace()) {
                return Err(CorpusError::BadSiteId(s.clone()));
            }
            if !seen.insert(s.as_str()) {
                return Err(CorpusError::DuplicateSite(s.clone()));
            }
        }
        Ok(WebsiteUniverse { sites })
    }

    pub fn default_sites() -> Self {
        Self::new(DEFAULT_SITES).expect("default universe is valid")
    }

    /// One site per line; blank lines and `#` comments are ignored. A JSON
    /// array of strings is accepted as well.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('[') {
            let sites: Vec<String> =
                serde_json::from_str(trimmed).map_err(|e| CorpusError::BadUniverseFile(e.to_string()))?;
            return Self::new(sites);
        }
        Self::new(
            text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_ascii_lowercase),
        )
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[String] {
        &self.sites
    }

    pub fn site(&self, index: usize) -> &str {
        &self.sites[index]
    }

    pub fn index_of(&self, site: &str) -> Option<usize> {
        self.sites.iter().position(|s| s == site)
    }

    pub fn label_vector<S: AsRef<str>>(&self, sites: &[S]) -> Result<LabelVector, CorpusError> {
        LabelVector::from_sites(self, sites)
    }
}

impl TryFrom<Vec<String>> for WebsiteUniverse {
    type Error = CorpusError;

    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<WebsiteUniverse> for Vec<String> {
    fn from(u: WebsiteUniverse) -> Self {
        u.sites
    }
}

/// Multi-hot target over the universe's slots.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelVector {
    bits: Vec<bool>,
}

impl LabelVector {
    /// Labels name one to four sites (single, tuple, triple, 4-tuple).
    pub fn from_sites<S: AsRef<str>>(universe: &WebsiteUniverse, sites: &[S]) -> Result<Self, CorpusError> {
        let mut bits = vec![false; universe.len()];
        for s in sites {
            let s = s.as_ref();
            let i = universe.index_of(s).ok_or_else(|| CorpusError::UnknownSite(s.to_string()))?;
            bits[i] = true;
        }
        let count = bits.iter().filter(|b| **b).count();
        if !(1..=4).contains(&count) {
            return Err(CorpusError::BadLabelSize(count));
        }
        Ok(LabelVector { bits })
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        LabelVector { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn sites<'a>(&self, universe: &'a WebsiteUniverse) -> Vec<&'a str> {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| universe.site(i)).collect()
    }
}
