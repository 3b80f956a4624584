use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Chunk, DocumentRecord};
use crate::error::{Error, Result};
use crate::index::RankedHit;
use crate::sampling::{SamplingPlan, Stage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextRef {
    pub doc_id: String,
    pub chunk_id: String,
}

/// A hit queued for annotation, with everything the annotator sees.
/// Metadata fields are always present, possibly empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub candidate_id: String,
    pub query_id: String,
    pub quote_text: String,
    pub chunk_id: String,
    pub hit_text: String,
    pub rank: usize,
    pub score: f32,
    pub pool_size: usize,
    pub stage: Stage,
    pub doc_id: String,
    pub work_id: String,
    pub author: String,
    pub title: String,
    pub year: Option<i32>,
    pub genre: String,
    pub declared_language: String,
    pub context_ref: ContextRef,
}

pub fn candidate_id(query_id: &str, rank: usize) -> String {
    format!("{query_id}:{rank}")
}

/// Lookup tables needed to turn ranked hits into candidates.
#[derive(Debug, Clone, Default)]
pub struct CandidateSource<'a> {
    pub documents: HashMap<&'a str, &'a DocumentRecord>,
    pub chunk_texts: HashMap<&'a str, &'a str>,
    pub quotes: HashMap<&'a str, &'a str>,
}

impl<'a> CandidateSource<'a> {
    pub fn new(documents: &'a [DocumentRecord], chunks: &'a [Chunk]) -> Self {
        Self {
            documents: documents.iter().map(|d| (d.doc_id.as_str(), d)).collect(),
            chunk_texts: chunks
                .iter()
                .map(|c| (c.chunk_id.as_str(), c.text.as_str()))
                .collect(),
            quotes: HashMap::new(),
        }
    }

    pub fn with_quote(mut self, query_id: &'a str, text: &'a str) -> Self {
        self.quotes.insert(query_id, text);
        self
    }
}

/// One candidate per plan entry, joined with document metadata. `hits` is
/// the ranked pool the plan was drawn from.
pub fn enqueue_candidates(
    plan: &SamplingPlan,
    hits: &[RankedHit],
    source: &CandidateSource<'_>,
) -> Result<Vec<Candidate>> {
    let by_rank: HashMap<usize, &RankedHit> = hits
        .iter()
        .filter(|h| h.query_id == plan.query_id)
        .map(|h| (h.rank, h))
        .collect();
    plan.entries
        .iter()
        .map(|entry| {
            let hit = by_rank
                .get(&entry.rank)
                .ok_or_else(|| Error::UnresolvableRank {
                    query_id: plan.query_id.clone(),
                    rank: entry.rank,
                })?;
            let doc = source.documents.get(hit.doc_id.as_str());
            let text =
                |f: fn(&DocumentRecord) -> &String| doc.map(|d| f(d).clone()).unwrap_or_default();
            Ok(Candidate {
                candidate_id: candidate_id(&plan.query_id, entry.rank),
                query_id: plan.query_id.clone(),
                quote_text: source
                    .quotes
                    .get(plan.query_id.as_str())
                    .map(|s| s.to_string())
                    .unwrap_or_default(),
                chunk_id: hit.chunk_id.clone(),
                hit_text: source
                    .chunk_texts
                    .get(hit.chunk_id.as_str())
                    .map(|s| s.to_string())
                    .unwrap_or_default(),
                rank: hit.rank,
                score: hit.score,
                pool_size: plan.pool_size,
                stage: plan.stage,
                doc_id: hit.doc_id.clone(),
                work_id: hit.work_id.clone(),
                author: text(|d| &d.author),
                title: text(|d| &d.title),
                year: doc.and_then(|d| d.year),
                genre: text(|d| &d.genre),
                declared_language: text(|d| &d.declared_language),
                context_ref: ContextRef {
                    doc_id: hit.doc_id.clone(),
                    chunk_id: hit.chunk_id.clone(),
                },
            })
        })
        .collect()
}
