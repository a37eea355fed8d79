use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::corpus::WebsiteUniverse;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedName {
    pub name: String,
    pub probability: f64,
}

/// How one page visit's events are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BurstModel {
    /// Geometric length on `1..=max` with the given untruncated mean; each
    /// event is first-party with probability `first_party_share`.
    Sampled { mean: f64, max: usize, first_party_share: f64 },
    /// The same names in the same order on every visit.
    Fixed { names: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteProfile {
    pub site: String,
    /// Templates over `{site}` and `{rand}`.
    pub first_party: Vec<String>,
    /// Values substituted for `{rand}`.
    pub rand_tokens: Vec<String>,
    pub third_party: Vec<WeightedName>,
    pub burst: BurstModel,
}

impl SiteProfile {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |why: &str| Err(SynthError::BadConfig(format!("profile {}: {why}", self.site)));
        match &self.burst {
            BurstModel::Fixed { names } => {
                if names.is_empty() {
                    return bad("fixed burst has no names");
                }
            }
            BurstModel::Sampled { mean, max, first_party_share } => {
                if self.first_party.is_empty() {
                    return bad("no first-party template");
                }
                if !(*mean >= 1.0) || *max == 0 || !(0.0..=1.0).contains(first_party_share) {
                    return bad("burst parameters out of range");
                }
                if self.first_party.iter().any(|t| t.contains("{rand}")) && self.rand_tokens.is_empty() {
                    return bad("{rand} template without tokens");
                }
                if *first_party_share < 1.0 {
                    let sum: f64 = self.third_party.iter().map(|w| w.probability).sum();
                    if self.third_party.is_empty()
                        || (sum - 1.0).abs() > 1e-9
                        || self.third_party.iter().any(|w| !(w.probability >= 0.0))
                    {
                        return bad("third-party probabilities must be non-negative and sum to 1");
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Interleave {
    /// Sites take turns, one burst each, in a per-trace random order.
    RoundRobin,
    /// Each site starts bursts on its own exponential clock and events from
    /// all sites are merged by time.
    ExponentialClock { mean_burst_gap_ms: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Realistic-looking profiles: site-named first-party hosts, partly
    /// shared third-party hosts.
    Default,
    /// Disjoint per-site name pools and no noise.
    Separable,
    /// One shared pool, with each site visiting it in its own fixed order.
    OrderSignal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub universe: WebsiteUniverse,
    pub profiles: Vec<SiteProfile>,
    pub pages_per_site: usize,
    pub interleave: Interleave,
    /// Probability that an event is replaced by a name from `noise_pool`.
    pub noise_rate: f64,
    pub noise_pool: Vec<String>,
    /// Probability that an event is negotiated as TLS 1.3.
    pub tls13_share: f64,
    /// Gap between consecutive events, drawn uniformly, in microseconds.
    pub event_gap_us: (u64, u64),
    /// Capture start, whole seconds since the epoch.
    pub start_time: u64,
    pub seed: u64,
}

const CDN_SUFFIXES: [&str; 6] =
    ["cloudfront.net", "akamaized.net", "fastly.net", "edgecastcdn.net", "azureedge.net", "cdn77.org"];
const NOISE_SUFFIXES: [&str; 3] = ["msftconnecttest.com", "push-service.net", "update-check.org"];

fn token(rng: &mut impl Rng, len: usize) -> String {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())] as char).collect()
}

/// A fresh `token.suffix` name that contains no site id and is not in
/// `taken`.
fn fresh_name(rng: &mut impl Rng, suffixes: &[&str], universe: &WebsiteUniverse, taken: &mut BTreeSet<String>) -> String {
    loop {
        let name = format!("{}.{}", token(rng, 6), suffixes[rng.gen_range(0..suffixes.len())]);
        if !universe.sites().iter().any(|s| name.contains(s.as_str())) && taken.insert(name.clone()) {
            return name;
        }
    }
}

/// Probabilities proportional to `1/(k+1)`.
fn zipf_weights(names: Vec<String>) -> Vec<WeightedName> {
    let total: f64 = (0..names.len()).map(|k| 1.0 / (k + 1) as f64).sum();
    names
        .into_iter()
        .enumerate()
        .map(|(k, name)| WeightedName { name, probability: 1.0 / (k + 1) as f64 / total })
        .collect()
}

/// Parameters of the generated profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileShape {
    pub third_party_per_site: usize,
    /// Share of each site's third-party names drawn from a common pool.
    pub overlap: f64,
    pub burst_mean: f64,
    pub burst_max: usize,
    pub first_party_share: f64,
}

impl Default for ProfileShape {
    fn default() -> Self {
        ProfileShape { third_party_per_site: 8, overlap: 0.3, burst_mean: 6.0, burst_max: 9, first_party_share: 0.5 }
    }
}

/// Four first-party templates and `third_party_per_site` third-party names
/// per site, a rounded `overlap` share of which come from a common pool.
pub fn sampled_profiles(universe: &WebsiteUniverse, shape: ProfileShape, seed: u64) -> Vec<SiteProfile> {
    let mut rng = rng::stream(seed, "synth_profiles", 0);
    let mut taken = BTreeSet::new();
    let shared_count = (shape.third_party_per_site as f64 * shape.overlap).round() as usize;
    let shared_pool: Vec<String> = (0..if shared_count > 0 { shared_count * 3 } else { 0 })
        .map(|_| fresh_name(&mut rng, &CDN_SUFFIXES, universe, &mut taken))
        .collect();
    universe
        .sites()
        .iter()
        .map(|site| {
            let mut third: Vec<String> = shared_pool.choose_multiple(&mut rng, shared_count).cloned().collect();
            while third.len() < shape.third_party_per_site {
                third.push(fresh_name(&mut rng, &CDN_SUFFIXES, universe, &mut taken));
            }
            third.shuffle(&mut rng);
            SiteProfile {
                site: site.clone(),
                first_party: ["www.{site}", "static.{site}", "api.{site}", "{rand}.{site}"].map(String::from).to_vec(),
                rand_tokens: (0..3).map(|_| token(&mut rng, 5)).collect(),
                third_party: zipf_weights(third),
                burst: BurstModel::Sampled {
                    mean: shape.burst_mean,
                    max: shape.burst_max,
                    first_party_share: shape.first_party_share,
                },
            }
        })
        .collect()
}

/// Every site visits the same `pool_size` names, each in its own fixed
/// order. All orders are distinct.
pub fn order_profiles(universe: &WebsiteUniverse, pool_size: usize, seed: u64) -> Vec<SiteProfile> {
    let mut rng = rng::stream(seed, "synth_profiles", 0);
    let mut taken = BTreeSet::new();
    let pool: Vec<String> = (0..pool_size).map(|_| fresh_name(&mut rng, &CDN_SUFFIXES, universe, &mut taken)).collect();
    let mut orders: BTreeSet<Vec<String>> = BTreeSet::new();
    universe
        .sites()
        .iter()
        .map(|site| {
            let names = loop {
                let mut p = pool.clone();
                p.shuffle(&mut rng);
                if orders.insert(p.clone()) {
                    break p;
                }
            };
            SiteProfile {
                site: site.clone(),
                first_party: Vec::new(),
                rand_tokens: Vec::new(),
                third_party: Vec::new(),
                burst: BurstModel::Fixed { names },
            }
        })
        .collect()
}

fn factorial_at_least(n: usize, k: usize) -> bool {
    let mut f: usize = 1;
    for i in 1..=n {
        f = f.saturating_mul(i);
        if f >= k {
            return true;
        }
    }
    f >= k
}

impl SynthConfig {
    pub fn preset(preset: Preset, universe: WebsiteUniverse, seed: u64) -> Result<Self, SynthError> {
        let mut noise_rng = rng::stream(seed, "synth_noise_pool", 0);
        let mut taken = BTreeSet::new();
        let noise_pool = (0..4).map(|_| fresh_name(&mut noise_rng, &NOISE_SUFFIXES, &universe, &mut taken)).collect();
        let (profiles, noise_rate) = match preset {
            Preset::Default => (sampled_profiles(&universe, ProfileShape::default(), seed), 0.02),
            Preset::Separable => {
                (sampled_profiles(&universe, ProfileShape { overlap: 0.0, ..ProfileShape::default() }, seed), 0.0)
            }
            Preset::OrderSignal => {
                let pool = 6;
                if !factorial_at_least(pool, universe.len()) {
                    return Err(SynthError::BadConfig(format!("{} sites need more than {pool}! orders", universe.len())));
                }
                (order_profiles(&universe, pool, seed), 0.0)
            }
        };
        let config = SynthConfig {
            universe,
            profiles,
            pages_per_site: 15,
            interleave: Interleave::RoundRobin,
            noise_rate,
            noise_pool,
            tls13_share: 0.5,
            event_gap_us: (10_000, 250_000),
            start_time: 1_600_000_000,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(0.0..=0.5).contains(&self.noise_rate) {
            return Err(SynthError::BadConfig(format!("noise rate {} outside [0, 0.5]", self.noise_rate)));
        }
        if self.noise_rate > 0.0 && self.noise_pool.is_empty() {
            return Err(SynthError::BadConfig("noise without a noise pool".into()));
        }
        if !(0.0..=1.0).contains(&self.tls13_share) {
            return Err(SynthError::BadConfig(format!("TLS 1.3 share {}", self.tls13_share)));
        }
        if self.event_gap_us.0 == 0 || self.event_gap_us.0 > self.event_gap_us.1 {
            return Err(SynthError::BadConfig("event gap range must be positive and ordered".into()));
        }
        if let Interleave::ExponentialClock { mean_burst_gap_ms } = self.interleave {
            if !(mean_burst_gap_ms > 0.0) {
                return Err(SynthError::BadConfig("mean burst gap must be positive".into()));
            }
        }
        for site in self.universe.sites() {
            if !self.profiles.iter().any(|p| &p.site == site) {
                return Err(SynthError::BadConfig(format!("no profile for {site}")));
            }
        }
        for p in &self.profiles {
            if self.universe.index_of(&p.site).is_none() {
                return Err(SynthError::UnknownSite(p.site.clone()));
            }
            p.validate()?;
        }
        Ok(())
    }

    pub fn profile(&self, site: &str) -> Result<&SiteProfile, SynthError> {
        self.profiles.iter().find(|p| p.site == site).ok_or_else(|| SynthError::UnknownSite(site.to_string()))
    }
}
