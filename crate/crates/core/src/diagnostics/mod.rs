//! Linguistic diagnostics of retrieval behaviour: lexical overlap, OCR noise
//! and part-of-speech divergence between quotes and hits, grouped into
//! rank-band confusion quadrants, plus language enrichment per label.

pub mod annotator;
pub mod features;
pub mod language;
pub mod quadrants;

use std::collections::HashMap;

use rayon::prelude::*;

pub use annotator::{
    lemmatize, AnnotatedToken, Lexicon, LinguisticAnnotator, PosTag, RuleAnnotator,
};
pub use features::{
    jaccard, jensen_shannon, oov_rate, pos_jsd, profile, vocab_jaccard, LinguisticProfile,
    Vocabulary,
};
pub use language::{
    language_distribution, token_baseline, LanguageDetector, LanguageRow, LanguageTable,
    StopwordDetector,
};
pub use quadrants::{
    assign_quadrants, mean_std, percentile_rank, quadrant_summary, CandidateFeatures,
    FeatureSummary, MeanStd, Quadrant, QuadrantAssignment, QuadrantInput, QuadrantOptions,
};

use crate::annotate::ExportRecord;

pub fn candidate_features(
    quote: &str,
    hit: &str,
    annotator: &dyn LinguisticAnnotator,
    vocabulary: &Vocabulary,
) -> CandidateFeatures {
    let q = profile(quote, annotator, vocabulary);
    let h = profile(hit, annotator, vocabulary);
    CandidateFeatures {
        vocab_sim: Some(vocab_jaccard(&q, &h)),
        quote_oov: oov_rate(&q),
        hit_oov: oov_rate(&h),
        pos_div: pos_jsd(&q, &h),
    }
}

/// Features for every exported annotation, keyed by candidate id.
pub fn compute_features(
    records: &[ExportRecord],
    annotator: &dyn LinguisticAnnotator,
    vocabulary: &Vocabulary,
) -> HashMap<String, CandidateFeatures> {
    records
        .par_iter()
        .map(|r| {
            let f = candidate_features(
                &r.candidate.quote_text,
                &r.candidate.hit_text,
                annotator,
                vocabulary,
            );
            (r.candidate.candidate_id.clone(), f)
        })
        .collect()
}

/// Quadrant inputs with languages from `detector` run on the hit text.
pub fn quadrant_inputs(
    records: &[ExportRecord],
    detector: &dyn LanguageDetector,
) -> Vec<QuadrantInput> {
    records
        .par_iter()
        .map(|r| QuadrantInput {
            candidate_id: r.candidate.candidate_id.clone(),
            label: r.label,
            percentile_rank: percentile_rank(r.candidate.rank, r.candidate.pool_size),
            language: Some(detector.detect(&r.candidate.hit_text)),
        })
        .collect()
}
