use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::annotate::Label;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quadrant {
    TopP,
    TopN,
    TailN,
    TailP,
    Unbanded,
}

impl Quadrant {
    pub const BANDED: [Quadrant; 4] = [
        Quadrant::TopP,
        Quadrant::TopN,
        Quadrant::TailN,
        Quadrant::TailP,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::TopP => "TopP",
            Quadrant::TopN => "TopN",
            Quadrant::TailN => "TailN",
            Quadrant::TailP => "TailP",
            Quadrant::Unbanded => "Unbanded",
        }
    }
}

pub const TOP_BAND_MAX: f64 = 0.30;
pub const TAIL_BAND_MIN: f64 = 0.60;
pub const TAIL_BAND_MAX: f64 = 0.90;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantInput {
    pub candidate_id: String,
    pub label: Label,
    /// rank / pool_size
    pub percentile_rank: Option<f64>,
    /// Detected language tag, consulted when restricting to English.
    pub language: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrantOptions {
    pub english_only: bool,
    /// Count Topical Match as a negative alongside No Match. When false,
    /// Topical Match hits are left unbanded.
    pub inclusive_negatives: bool,
}

impl Default for QuadrantOptions {
    fn default() -> Self {
        Self {
            english_only: true,
            inclusive_negatives: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrantAssignment {
    pub candidate_id: String,
    pub quadrant: Quadrant,
}

pub fn percentile_rank(rank: usize, pool_size: usize) -> Option<f64> {
    (pool_size > 0).then(|| rank as f64 / pool_size as f64)
}

pub fn quadrant_for(label: Label, percentile: f64, inclusive_negatives: bool) -> Quadrant {
    let positive = match label {
        Label::Paraphrase | Label::MeaningMatch => true,
        Label::NoMatch => false,
        Label::TopicalMatch if inclusive_negatives => false,
        Label::TopicalMatch | Label::DontKnow => return Quadrant::Unbanded,
    };
    let top = percentile <= TOP_BAND_MAX;
    let tail = percentile > TAIL_BAND_MIN && percentile <= TAIL_BAND_MAX;
    match (top, tail, positive) {
        (true, _, true) => Quadrant::TopP,
        (true, _, false) => Quadrant::TopN,
        (_, true, false) => Quadrant::TailN,
        (_, true, true) => Quadrant::TailP,
        _ => Quadrant::Unbanded,
    }
}

pub fn is_english(tag: Option<&str>) -> bool {
    matches!(tag, Some(t) if t.eq_ignore_ascii_case("en") || t.eq_ignore_ascii_case("eng") || t.eq_ignore_ascii_case("english"))
}

pub fn assign_quadrants(
    hits: &[QuadrantInput],
    opts: QuadrantOptions,
) -> Result<Vec<QuadrantAssignment>> {
    hits.iter()
        .map(|h| {
            let p = h
                .percentile_rank
                .ok_or_else(|| Error::MissingPercentile(h.candidate_id.clone()))?;
            let quadrant = if opts.english_only && !is_english(h.language.as_deref()) {
                Quadrant::Unbanded
            } else {
                quadrant_for(h.label, p, opts.inclusive_negatives)
            };
            Ok(QuadrantAssignment {
                candidate_id: h.candidate_id.clone(),
                quadrant,
            })
        })
        .collect()
}

/// Per-candidate features; `None` where a feature is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CandidateFeatures {
    pub vocab_sim: Option<f64>,
    pub quote_oov: Option<f64>,
    pub hit_oov: Option<f64>,
    pub pos_div: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(MeanStd {
        mean,
        std: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub quadrant: Quadrant,
    pub n: usize,
    pub vocab_sim: Option<MeanStd>,
    pub quote_oov: Option<MeanStd>,
    pub hit_oov: Option<MeanStd>,
    pub pos_div: Option<MeanStd>,
}

/// One row per banded quadrant, in TopP, TopN, TailN, TailP order. A
/// candidate without features counts toward `n` but not the statistics.
pub fn quadrant_summary(
    assignments: &[QuadrantAssignment],
    features: &HashMap<String, CandidateFeatures>,
) -> Vec<FeatureSummary> {
    Quadrant::BANDED
        .iter()
        .map(|&q| {
            let members: Vec<Option<&CandidateFeatures>> = assignments
                .iter()
                .filter(|a| a.quadrant == q)
                .map(|a| features.get(&a.candidate_id))
                .collect();
            let collect = |f: fn(&CandidateFeatures) -> Option<f64>| {
                let vals: Vec<f64> = members.iter().flatten().filter_map(|c| f(c)).collect();
                mean_std(&vals)
            };
            FeatureSummary {
                quadrant: q,
                n: members.len(),
                vocab_sim: collect(|c| c.vocab_sim),
                quote_oov: collect(|c| c.quote_oov),
                hit_oov: collect(|c| c.hit_oov),
                pos_div: collect(|c| c.pos_div),
            }
        })
        .collect()
}
