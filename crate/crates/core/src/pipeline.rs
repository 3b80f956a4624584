//! Turning raw ranked hits into the annotation pool.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Chunk;
use crate::error::{Error, Result};
use crate::index::RankedHit;
use crate::reuse::{AlignmentMatch, Span};

fn rerank(mut hits: Vec<RankedHit>) -> Vec<RankedHit> {
    for (i, h) in hits.iter_mut().enumerate() {
        h.rank = i + 1;
    }
    hits
}

/// Keeps hits from allowed documents and re-ranks them densely from 1.
pub fn filter_subcorpus(hits: &[RankedHit], allowed_doc_ids: &HashSet<String>) -> Vec<RankedHit> {
    rerank(
        hits.iter()
            .filter(|h| allowed_doc_ids.contains(&h.doc_id))
            .cloned()
            .collect(),
    )
}

/// Keeps the best-ranked hit of every work and re-ranks densely.
pub fn dedupe_by_work(hits: &[RankedHit]) -> Vec<RankedHit> {
    let mut sorted: Vec<&RankedHit> = hits.iter().collect();
    sorted.sort_by_key(|h| h.rank);
    let mut seen = HashSet::new();
    rerank(
        sorted
            .into_iter()
            .filter(|h| seen.insert(h.work_id.as_str()))
            .cloned()
            .collect(),
    )
}

/// Where each chunk sits in its document.
#[derive(Debug, Clone, Default)]
pub struct ChunkSpans {
    spans: HashMap<String, (String, Span)>,
}

impl ChunkSpans {
    pub fn from_chunks(chunks: &[Chunk]) -> Self {
        Self {
            spans: chunks
                .iter()
                .map(|c| {
                    (
                        c.chunk_id.clone(),
                        (c.doc_id.clone(), Span::new(c.char_start, c.char_end)),
                    )
                })
                .collect(),
        }
    }

    pub fn get(&self, chunk_id: &str) -> Option<&(String, Span)> {
        self.spans.get(chunk_id)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HitPartition {
    pub intersection: Vec<RankedHit>,
    pub unique_semantic: Vec<RankedHit>,
    pub unique_lexical: Vec<AlignmentMatch>,
}

/// Splits semantic hits by whether the lexical baseline already explains
/// them. A hit is explained when a lexical match lands in the same work and
/// document and its target span shares at least one character with the
/// hit's chunk.
pub fn anti_lexical_partition(
    semantic_hits: &[RankedHit],
    lexical_matches: &[AlignmentMatch],
    chunks: &ChunkSpans,
) -> Result<HitPartition> {
    let mut by_doc: HashMap<(&str, &str), Vec<usize>> = HashMap::new();
    for (i, m) in lexical_matches.iter().enumerate() {
        by_doc
            .entry((m.target_work.as_str(), m.target_doc.as_str()))
            .or_default()
            .push(i);
    }
    let mut paired = vec![false; lexical_matches.len()];
    let mut out = HitPartition::default();
    for hit in semantic_hits {
        let (doc_id, span) = chunks
            .get(&hit.chunk_id)
            .ok_or_else(|| Error::UnknownChunk(hit.chunk_id.clone()))?;
        let mut covered = false;
        if let Some(candidates) = by_doc.get(&(hit.work_id.as_str(), doc_id.as_str())) {
            for &i in candidates {
                if lexical_matches[i].target_span.overlap(span) > 0 {
                    paired[i] = true;
                    covered = true;
                }
            }
        }
        if covered {
            out.intersection.push(hit.clone());
        } else {
            out.unique_semantic.push(hit.clone());
        }
    }
    out.unique_lexical = lexical_matches
        .iter()
        .zip(&paired)
        .filter(|(_, &p)| !p)
        .map(|(m, _)| m.clone())
        .collect();
    Ok(out)
}

/// Share of lexical baseline hits that the semantic side also retrieved.
/// `None` when both sides are empty.
pub fn recall_from_counts(intersection: f64, unique_lexical: f64) -> Option<f64> {
    let total = intersection + unique_lexical;
    (total > 0.0).then(|| intersection / total)
}

pub fn lexical_recall(partition: &HitPartition) -> Option<f64> {
    recall_from_counts(
        partition.intersection.len() as f64,
        partition.unique_lexical.len() as f64,
    )
}

/// One line of a partition artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "partition", rename_all = "snake_case")]
pub enum PartitionRecord {
    Intersection(RankedHit),
    UniqueSemantic(RankedHit),
    UniqueLexical(AlignmentMatch),
}

impl HitPartition {
    pub fn to_records(&self) -> Vec<PartitionRecord> {
        self.intersection
            .iter()
            .cloned()
            .map(PartitionRecord::Intersection)
            .chain(
                self.unique_semantic
                    .iter()
                    .cloned()
                    .map(PartitionRecord::UniqueSemantic),
            )
            .chain(
                self.unique_lexical
                    .iter()
                    .cloned()
                    .map(PartitionRecord::UniqueLexical),
            )
            .collect()
    }

    pub fn from_records(records: Vec<PartitionRecord>) -> Self {
        let mut p = HitPartition::default();
        for r in records {
            match r {
                PartitionRecord::Intersection(h) => p.intersection.push(h),
                PartitionRecord::UniqueSemantic(h) => p.unique_semantic.push(h),
                PartitionRecord::UniqueLexical(m) => p.unique_lexical.push(m),
            }
        }
        p
    }
}
