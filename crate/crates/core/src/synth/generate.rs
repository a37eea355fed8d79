use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::profile::{BurstModel, Interleave, SiteProfile, SynthConfig};
use super::SynthError;
use crate::rng;
use crate::trace::{write_traces, TlsVersion, Trace, TraceEvent};

/// A generated trace with per-event ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTrace {
    pub trace: Trace,
    /// Site whose page produced each event; `None` for noise.
    pub origins: Vec<Option<String>>,
    /// Index of the page visit (burst) each event belongs to, unique within
    /// the trace.
    pub bursts: Vec<usize>,
}

#[derive(Serialize)]
struct TruthEvent<'a> {
    sni: &'a str,
    ts: f64,
    ver: TlsVersion,
    origin: Option<&'a str>,
    burst: usize,
}

#[derive(Serialize)]
struct TruthLine<'a> {
    label: &'a [String],
    events: Vec<TruthEvent<'a>>,
}

struct Burst {
    site: usize,
    names: Vec<(String, bool)>,
}

fn sample_burst(profile: &SiteProfile, rng: &mut impl Rng) -> Vec<String> {
    match &profile.burst {
        BurstModel::Fixed { names } => names.clone(),
        BurstModel::Sampled { mean, max, first_party_share } => {
            // geometric on 1, 2, ... with success probability 1/mean
            let p = 1.0 / mean;
            let len = if p >= 1.0 {
                1
            } else {
                let u: f64 = 1.0 - rng.gen::<f64>();
                1 + (u.ln() / (1.0 - p).ln()).floor() as usize
            };
            let third = (!profile.third_party.is_empty())
                .then(|| WeightedIndex::new(profile.third_party.iter().map(|w| w.probability)).ok())
                .flatten();
            (0..len.min(*max))
                .map(|_| match &third {
                    Some(dist) if rng.gen::<f64>() >= *first_party_share => {
                        profile.third_party[dist.sample(rng)].name.clone()
                    }
                    _ => {
                        let t = &profile.first_party[rng.gen_range(0..profile.first_party.len())];
                        let mut name = t.replace("{site}", &profile.site);
                        if name.contains("{rand}") {
                            let tok = &profile.rand_tokens[rng.gen_range(0..profile.rand_tokens.len())];
                            name = name.replace("{rand}", tok);
                        }
                        name
                    }
                })
                .collect()
        }
    }
}

/// One capture of the sites in `label` visited together.
///
/// Each site gets `pages_per_site` bursts. Noise replaces events in place.
/// The result depends only on the config, the label and `repetition`.
pub fn generate_trace(config: &SynthConfig, label: &[String], repetition: u64) -> Result<SynthTrace, SynthError> {
    let profiles = label.iter().map(|s| config.profile(s)).collect::<Result<Vec<_>, _>>()?;
    let mut rng = rng::stream(config.seed, &format!("synth_trace/{}", label.join(",")), repetition);

    let mut order: Vec<usize> = (0..label.len()).collect();
    order.shuffle(&mut rng);
    let mut bursts: Vec<Vec<Burst>> = (0..label.len()).map(|_| Vec::new()).collect();
    for &s in &order {
        for _ in 0..config.pages_per_site {
            let names = sample_burst(profiles[s], &mut rng)
                .into_iter()
                .map(|n| {
                    if config.noise_rate > 0.0 && rng.gen::<f64>() < config.noise_rate {
                        (config.noise_pool[rng.gen_range(0..config.noise_pool.len())].clone(), true)
                    } else {
                        (n, false)
                    }
                })
                .collect();
            bursts[s].push(Burst { site: s, names });
        }
    }

    // (time offset in µs, burst id, event)
    let mut events: Vec<(u64, usize, String, bool, usize)> = Vec::new();
    let gap = |rng: &mut rand_chacha::ChaCha8Rng| rng.gen_range(config.event_gap_us.0..=config.event_gap_us.1);
    match config.interleave {
        Interleave::RoundRobin => {
            let mut t = 0u64;
            let mut burst_id = 0;
            for k in 0..config.pages_per_site {
                for &s in &order {
                    let b = &bursts[s][k];
                    for (name, noise) in &b.names {
                        t += gap(&mut rng);
                        events.push((t, burst_id, name.clone(), *noise, b.site));
                    }
                    burst_id += 1;
                }
            }
        }
        Interleave::ExponentialClock { mean_burst_gap_ms } => {
            let mut burst_id = 0;
            for &s in &order {
                let mut clock = 0.0f64;
                for b in &bursts[s] {
                    let u: f64 = 1.0 - rng.gen::<f64>();
                    clock += -u.ln() * mean_burst_gap_ms * 1000.0;
                    let mut t = clock.round() as u64;
                    for (name, noise) in &b.names {
                        t += gap(&mut rng);
                        events.push((t, burst_id, name.clone(), *noise, b.site));
                    }
                    burst_id += 1;
                }
            }
            events.sort_by_key(|e| (e.0, e.1));
            let mut last = 0u64;
            for e in &mut events {
                e.0 = e.0.max(last + 1);
                last = e.0;
            }
        }
    }

    let base_us = config.start_time * 1_000_000;
    let mut trace = Trace { label: label.to_vec(), events: Vec::with_capacity(events.len()) };
    let mut origins = Vec::with_capacity(events.len());
    let mut burst_ids = Vec::with_capacity(events.len());
    for (t, burst, name, noise, site) in events {
        let ver = if rng.gen::<f64>() < config.tls13_share { TlsVersion::Tls13 } else { TlsVersion::Tls12 };
        trace.events.push(TraceEvent { sni: name, ts: (base_us + t) as f64 / 1e6, ver });
        origins.push((!noise).then(|| label[site].clone()));
        burst_ids.push(burst);
    }
    Ok(SynthTrace { trace, origins, bursts: burst_ids })
}

/// `repetitions` traces per label, label-major. Sub-seeds are derived per
/// (label, repetition), so the output does not depend on scheduling.
pub fn generate_corpus(
    config: &SynthConfig,
    labels: &[Vec<String>],
    repetitions: u64,
) -> Result<Vec<SynthTrace>, SynthError> {
    config.validate()?;
    for label in labels {
        for site in label {
            config.profile(site)?;
        }
    }
    let jobs: Vec<(&Vec<String>, u64)> =
        labels.iter().flat_map(|l| (0..repetitions).map(move |r| (l, r))).collect();
    jobs.par_iter().map(|(l, r)| generate_trace(config, l, *r)).collect()
}

pub const TRUTH_FILE: &str = "truth.jsonl";

/// Writes the trace file and its ground-truth sidecar.
pub fn write_corpus(dir: &Path, corpus: &[SynthTrace]) -> Result<(), SynthError> {
    fs::create_dir_all(dir)?;
    let traces: Vec<Trace> = corpus.iter().map(|s| s.trace.clone()).collect();
    write_traces(&dir.join(crate::corpus::TRACES_FILE), &traces)?;
    let mut w = BufWriter::new(File::create(dir.join(TRUTH_FILE))?);
    for s in corpus {
        let line = TruthLine {
            label: &s.trace.label,
            events: s
                .trace
                .events
                .iter()
                .zip(&s.origins)
                .zip(&s.bursts)
                .map(|((e, o), &b)| TruthEvent { sni: &e.sni, ts: e.ts, ver: e.ver, origin: o.as_deref(), burst: b })
                .collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
