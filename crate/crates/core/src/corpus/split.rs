use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::rng;
use crate::trace::Trace;

/// Trace ids on each side of a split, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partitions whole traces, stratified by label.
///
/// The train side receives `round(N · fraction)` traces in total. Each
/// label group first gets `floor(m · fraction)` of its `m` traces, the
/// remaining quota goes to the groups with the largest fractional parts
/// (ties broken by the seed), and every group with at least two traces keeps
/// at least one trace on each side.
pub fn split(traces: &[Trace], train_fraction: f64, seed: u64) -> Result<Split, CorpusError> {
    let keys: Vec<Vec<String>> = traces.iter().map(Trace::label_key).collect();
    split_by_key(&keys, train_fraction, seed)
}

/// [`split`] over precomputed stratification keys, one per trace.
pub fn split_by_key<K: Ord + Clone>(keys: &[K], train_fraction: f64, seed: u64) -> Result<Split, CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::BadFraction(train_fraction));
    }
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (id, key) in keys.iter().enumerate() {
        groups.entry(key.clone()).or_default().push(id);
    }
    let mut rng = rng::stream(seed, "split", 0);

    struct Quota {
        ids: Vec<usize>,
        take: usize,
        cap: usize,
        remainder: f64,
        tiebreak: u64,
    }
    let mut quotas: Vec<Quota> = groups
        .into_values()
        .map(|ids| {
            let m = ids.len();
            let exact = m as f64 * train_fraction;
            let (floor, cap) = if m >= 2 {
                ((exact + 1e-9).floor().clamp(1.0, (m - 1) as f64) as usize, m - 1)
            } else {
                ((exact + 1e-9).floor() as usize, m)
            };
            Quota { ids, take: floor, cap, remainder: exact - floor as f64, tiebreak: rng.gen() }
        })
        .collect();

    let target = (keys.len() as f64 * train_fraction + 0.5).floor() as usize;
    let assigned: usize = quotas.iter().map(|q| q.take).sum();
    if target > assigned {
        let mut order: Vec<usize> = (0..quotas.len()).filter(|&i| quotas[i].take < quotas[i].cap).collect();
        order.sort_by(|&a, &b| {
            quotas[b]
                .remainder
                .partial_cmp(&quotas[a].remainder)
                .unwrap()
                .then(quotas[a].tiebreak.cmp(&quotas[b].tiebreak))
        });
        for &i in order.iter().take(target - assigned) {
            quotas[i].take += 1;
        }
    }

    let mut out = Split::default();
    for q in &mut quotas {
        q.ids.shuffle(&mut rng);
        out.train.extend_from_slice(&q.ids[..q.take]);
        out.test.extend_from_slice(&q.ids[q.take..]);
    }
    out.train.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn keys(labels: usize, per_label: usize) -> Vec<usize> {
        (0..labels).flat_map(|l| std::iter::repeat(l).take(per_label)).collect()
    }

    #[test]
    fn reference_corpus_counts() {
        let k = keys(190, 11);
        let s = split_by_key(&k, 0.85, 3).unwrap();
        assert!(s.train.len() == 1776 || s.train.len() == 1777, "{}", s.train.len());
        assert_eq!(s.train.len() + s.test.len(), 2090);
        let mut per_label: HashMap<usize, usize> = HashMap::new();
        for &id in &s.train {
            *per_label.entry(k[id]).or_default() += 1;
        }
        assert_eq!(per_label.len(), 190);
        assert!(per_label.values().all(|&c| c == 9 || c == 10));
    }

    #[test]
    fn deterministic_and_disjoint() {
        let k = keys(13, 4);
        let a = split_by_key(&k, 0.7, 9).unwrap();
        assert_eq!(a, split_by_key(&k, 0.7, 9).unwrap());
        assert!(a.train.iter().all(|id| !a.test.contains(id)));
        assert_ne!(a, split_by_key(&k, 0.7, 10).unwrap());
    }

    #[test]
    fn two_trace_groups_split_both_ways() {
        let k = keys(5, 2);
        let s = split_by_key(&k, 0.85, 1).unwrap();
        assert_eq!(s.train.len(), 5);
        assert_eq!(s.test.len(), 5);
    }

    #[test]
    fn bad_fraction() {
        assert!(matches!(split_by_key(&keys(2, 2), 1.0, 0), Err(CorpusError::BadFraction(_))));
        assert!(matches!(split_by_key(&keys(2, 2), 0.0, 0), Err(CorpusError::BadFraction(_))));
    }
}
