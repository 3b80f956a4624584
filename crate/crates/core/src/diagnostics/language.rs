use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::annotate::Label;
use crate::corpus::{tokenize, DocumentRecord};

pub const UNDETERMINED: &str = "und";

pub trait LanguageDetector: Sync {
    /// One language tag per text.
    fn detect(&self, text: &str) -> String;
}

/// Scores each language by how many tokens appear in its stopword list.
/// Ties go to the earlier language in the table; texts without any
/// stopword are undetermined.
#[derive(Debug, Clone)]
pub struct StopwordDetector {
    profiles: Vec<(&'static str, BTreeSet<&'static str>)>,
}

const STOPWORDS: &[(&str, &str)] = &[
    ("en", "the of and to in that is it for as with was be by not this which his are but from or have they he had their at we all an were there been who would so"),
    ("fr", "le la les de des du et est que qui une un dans pour pas sur par au aux ce cette il elle ils nous vous sont avec mais ou leur se son sa ses ne plus"),
    ("la", "et in est non ad cum quod qui quae ut sed ex per enim esse sunt autem etiam vel atque ab quam hoc nec ac eius tamen sic neque"),
    ("it", "il lo gli della delle di che e la le non per con una uno sono nel nella del degli ma come anche più questo quella essere"),
    ("es", "el los las del que y en un una por con para es no se su sus al lo como más pero sus este esta ser son fue"),
];

impl Default for StopwordDetector {
    fn default() -> Self {
        Self {
            profiles: STOPWORDS
                .iter()
                .map(|(lang, words)| (*lang, words.split_whitespace().collect()))
                .collect(),
        }
    }
}

impl LanguageDetector for StopwordDetector {
    fn detect(&self, text: &str) -> String {
        let tokens: Vec<String> = tokenize(text)
            .into_iter()
            .map(|t| t.to_lowercase())
            .collect();
        let mut best = (0usize, UNDETERMINED);
        for (lang, words) in &self.profiles {
            let score = tokens.iter().filter(|t| words.contains(t.as_str())).count();
            if score > best.0 {
                best = (score, lang);
            }
        }
        best.1.to_owned()
    }
}

/// Corpus baseline: word-token counts per declared language. Documents
/// without a declared language count as [`UNDETERMINED`].
pub fn token_baseline(docs: &[DocumentRecord]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for d in docs {
        let lang = match d.declared_language.trim() {
            "" => UNDETERMINED.to_owned(),
            l => l.to_owned(),
        };
        *out.entry(lang).or_default() += d.text.split_whitespace().count();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageRow {
    /// A label name, or `baseline`.
    pub category: String,
    pub n: usize,
    /// Percent per language; sums to 100 when `n > 0`.
    pub shares: BTreeMap<String, f64>,
    /// Category share divided by baseline share; absent where the baseline
    /// share is zero and on the baseline row itself.
    pub enrichment: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageTable {
    pub languages: Vec<String>,
    pub rows: Vec<LanguageRow>,
    pub baseline: LanguageRow,
}

fn shares(
    counts: &BTreeMap<String, usize>,
    languages: &[String],
) -> (usize, BTreeMap<String, f64>) {
    let n: usize = counts.values().sum();
    let shares = languages
        .iter()
        .map(|l| {
            let c = counts.get(l).copied().unwrap_or(0);
            let pct = if n == 0 {
                0.0
            } else {
                100.0 * c as f64 / n as f64
            };
            (l.clone(), pct)
        })
        .collect();
    (n, shares)
}

/// Language shares per label against a token-weighted corpus baseline.
/// Labels with no observations are omitted.
pub fn language_distribution(
    observations: &[(Label, String)],
    baseline: &BTreeMap<String, usize>,
) -> LanguageTable {
    let languages: Vec<String> = observations
        .iter()
        .map(|(_, l)| l.clone())
        .chain(baseline.keys().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let (base_n, base_shares) = shares(baseline, &languages);
    let rows = Label::ALL
        .iter()
        .filter_map(|&label| {
            let mut counts = BTreeMap::new();
            for (l, lang) in observations {
                if *l == label {
                    *counts.entry(lang.clone()).or_default() += 1;
                }
            }
            let (n, row_shares) = shares(&counts, &languages);
            (n > 0).then(|| {
                let enrichment = row_shares
                    .iter()
                    .filter_map(|(lang, s)| {
                        let b = base_shares[lang];
                        (b > 0.0).then(|| (lang.clone(), s / b))
                    })
                    .collect();
                LanguageRow {
                    category: label.as_str().to_owned(),
                    n,
                    shares: row_shares,
                    enrichment,
                }
            })
        })
        .collect();
    LanguageTable {
        languages,
        rows,
        baseline: LanguageRow {
            category: "baseline".into(),
            n: base_n,
            shares: base_shares,
            enrichment: BTreeMap::new(),
        },
    }
}
