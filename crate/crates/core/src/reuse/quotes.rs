//! Query quote extraction and tiered query-set selection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cluster::ReuseCluster;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuoteConstraints {
    pub min_len: usize,
    pub max_len: usize,
    pub min_freq: usize,
}

impl Default for QuoteConstraints {
    fn default() -> Self {
        Self {
            min_len: 150,
            max_len: 300,
            min_freq: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryQuote {
    pub quote_id: String,
    pub cluster_id: String,
    pub text: String,
    pub external_frequency: usize,
    pub frequency_rank: usize,
}

/// Keeps clusters whose canonical text length (in characters) and external
/// frequency satisfy `constraints`, ordered by frequency descending then
/// cluster id, and ranked from 1.
pub fn extract_query_quotes(
    clusters: &[ReuseCluster],
    constraints: QuoteConstraints,
) -> Vec<QueryQuote> {
    let mut kept: Vec<&ReuseCluster> = clusters
        .iter()
        .filter(|c| {
            let len = c.canonical_text.chars().count();
            len >= constraints.min_len
                && len <= constraints.max_len
                && c.external_frequency >= constraints.min_freq
        })
        .collect();
    kept.sort_by(|a, b| {
        b.external_frequency
            .cmp(&a.external_frequency)
            .then_with(|| a.cluster_id.cmp(&b.cluster_id))
    });
    kept.into_iter()
        .enumerate()
        .map(|(i, c)| QueryQuote {
            quote_id: format!("q{}", i + 1),
            cluster_id: c.cluster_id.clone(),
            text: c.canonical_text.clone(),
            external_frequency: c.external_frequency,
            frequency_rank: i + 1,
        })
        .collect()
}

/// Frequency-rank tiers: the first is taken whole, the rest are sampled.
pub const TIERS: [(usize, usize); 4] = [(1, 5), (6, 50), (51, 150), (151, 1000)];
pub const PER_TIER: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySelection {
    pub quotes: Vec<QueryQuote>,
    pub warnings: Vec<String>,
}

/// Selects the top tier plus `PER_TIER` seeded random picks from each lower
/// tier. Tiers with fewer than `PER_TIER` quotes are taken whole with a
/// shortfall warning.
pub fn select_query_set(quotes: &[QueryQuote], seed: u64) -> QuerySelection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::new();
    let mut warnings = Vec::new();
    for (t, &(lo, hi)) in TIERS.iter().enumerate() {
        let members: Vec<&QueryQuote> = quotes
            .iter()
            .filter(|q| q.frequency_rank >= lo && q.frequency_rank <= hi)
            .collect();
        if members.len() < PER_TIER {
            warnings.push(format!(
                "frequency tier {lo}-{hi} has {} quotes, fewer than {PER_TIER}",
                members.len()
            ));
            selected.extend(members.into_iter().cloned());
        } else if t == 0 {
            selected.extend(members.into_iter().take(PER_TIER).cloned());
        } else {
            let mut picks: Vec<usize> =
                rand::seq::index::sample(&mut rng, members.len(), PER_TIER).into_vec();
            picks.sort_unstable();
            selected.extend(picks.into_iter().map(|i| members[i].clone()));
        }
    }
    selected.sort_by_key(|q| q.frequency_rank);
    QuerySelection {
        quotes: selected,
        warnings,
    }
}
