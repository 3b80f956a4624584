use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::annotator::{LinguisticAnnotator, PosTag};
use crate::{Error, Result};

/// Reference word list for OOV measurement, stored lowercased.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    words: HashSet<String>,
}

impl Vocabulary {
    pub fn parse(source: &str) -> Self {
        source
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl<S: AsRef<str>> FromIterator<S> for Vocabulary {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self {
            words: iter
                .into_iter()
                .map(|w| w.as_ref().to_lowercase())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinguisticProfile {
    pub token_count: usize,
    pub lemma_set: BTreeSet<String>,
    pub oov_count: usize,
    /// Indexed by [`PosTag::index`].
    pub pos_distribution: [f64; 12],
    /// No tokens at all: the POS distribution is uniform by convention.
    pub degenerate: bool,
}

/// Profiles a text. `token_count` and `oov_count` cover word tokens
/// (anything with an alphanumeric character); the POS distribution covers
/// every token including punctuation.
pub fn profile(
    text: &str,
    annotator: &dyn LinguisticAnnotator,
    vocabulary: &Vocabulary,
) -> LinguisticProfile {
    let tokens = annotator.annotate(text);
    let mut counts = [0usize; 12];
    let mut lemma_set = BTreeSet::new();
    let (mut token_count, mut oov_count) = (0, 0);
    for t in &tokens {
        counts[t.tag.index()] += 1;
        if t.is_word() {
            token_count += 1;
            if !vocabulary.contains(&t.text) {
                oov_count += 1;
            }
        }
        if t.is_alphabetic() {
            lemma_set.insert(t.lemma.to_lowercase());
        }
    }
    let degenerate = tokens.is_empty();
    let pos_distribution = if degenerate {
        [1.0 / 12.0; 12]
    } else {
        counts.map(|c| c as f64 / tokens.len() as f64)
    };
    LinguisticProfile {
        token_count,
        lemma_set,
        oov_count,
        pos_distribution,
        degenerate,
    }
}

/// Jaccard similarity of two sets; two empty sets score 0 and are flagged
/// by the second element.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> (f64, bool) {
    if a.is_empty() && b.is_empty() {
        return (0.0, true);
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    (inter as f64 / union as f64, false)
}

pub fn vocab_jaccard(a: &LinguisticProfile, b: &LinguisticProfile) -> f64 {
    jaccard(&a.lemma_set, &b.lemma_set).0
}

/// Percentage of word tokens outside the vocabulary; `None` for no tokens.
pub fn oov_rate(p: &LinguisticProfile) -> Option<f64> {
    (p.token_count > 0).then(|| 100.0 * p.oov_count as f64 / p.token_count as f64)
}

/// Jensen-Shannon divergence with base-2 logarithms, in [0, 1]. Inputs must
/// be probability vectors of equal length.
pub fn jensen_shannon(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions over different supports");
    let kl_to_mid = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .zip(y)
            .filter(|(&xi, _)| xi > 0.0)
            .map(|(&xi, &yi)| xi * (xi / (0.5 * (xi + yi))).log2())
            .sum()
    };
    (0.5 * kl_to_mid(p, q) + 0.5 * kl_to_mid(q, p)).clamp(0.0, 1.0)
}

/// POS divergence between two profiles; `None` if either is degenerate.
pub fn pos_jsd(a: &LinguisticProfile, b: &LinguisticProfile) -> Option<f64> {
    (!a.degenerate && !b.degenerate)
        .then(|| jensen_shannon(&a.pos_distribution, &b.pos_distribution))
}

/// POS distribution as (tag, probability) pairs, for reporting.
pub fn pos_pairs(p: &LinguisticProfile) -> impl Iterator<Item = (PosTag, f64)> + '_ {
    PosTag::ALL
        .into_iter()
        .map(|t| (t, p.pos_distribution[t.index()]))
}
