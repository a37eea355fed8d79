use rand::seq::index;

use super::{CorpusError, WebsiteUniverse};
use crate::rng;

/// Three site indices, ascending.
pub type Triple = [usize; 3];

fn sorted(mut t: Triple) -> Triple {
    t.sort_unstable();
    t
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// One triple per unordered pair `{a, b}`, so every pair of sites is
/// labeled together at least once with only n(n−1)/2 labels.
///
/// The third site is `(a + b) mod n`, stepped forward past `a` and `b`.
/// Pairs are visited in lexicographic order. Distinct pairs may produce the
/// same triple.
pub fn pair_cover_triples(universe: &WebsiteUniverse) -> Result<Vec<Triple>, CorpusError> {
    let n = universe.len();
    if n < 3 {
        return Err(CorpusError::UniverseTooSmall(n));
    }
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            let mut c = (a + b) % n;
            while c == a || c == b {
                c = (c + 1) % n;
            }
            out.push(sorted([a, b, c]));
        }
    }
    Ok(out)
}

/// Triple of colexicographic rank `rank`.
fn unrank_triple(mut rank: u64) -> Triple {
    let mut out = [0usize; 3];
    for k in (1..=3u64).rev() {
        // largest c with C(c, k) <= rank
        let mut c = k - 1;
        while binomial(c + 1, k) <= rank {
            c += 1;
        }
        rank -= binomial(c, k);
        out[(k - 1) as usize] = c as usize;
    }
    out
}

/// `count` distinct triples drawn uniformly without replacement from all
/// C(n, 3).
pub fn random_triples(universe: &WebsiteUniverse, count: usize, seed: u64) -> Result<Vec<Triple>, CorpusError> {
    let n = universe.len();
    let total = binomial(n as u64, 3);
    if count as u64 > total {
        return Err(CorpusError::CountTooLarge { requested: count, available: total });
    }
    let mut rng = rng::stream(seed, "random_triples", 0);
    Ok(index::sample(&mut rng, total as usize, count).into_iter().map(|r| unrank_triple(r as u64)).collect())
}

pub fn triple_sites(universe: &WebsiteUniverse, t: &Triple) -> Vec<String> {
    t.iter().map(|&i| universe.site(i).to_string()).collect()
}
