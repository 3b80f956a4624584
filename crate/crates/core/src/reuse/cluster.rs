//! Grouping of alignment matches into reuse clusters anchored on the source.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::align::{AlignmentMatch, Span};

/// Fraction of the shorter span two source spans must share to merge.
pub const MERGE_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occurrence {
    pub doc_id: String,
    pub work_id: String,
    pub span: Span,
    pub source_span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReuseCluster {
    pub cluster_id: String,
    pub source_work: String,
    pub source_span: Span,
    pub canonical_text: String,
    pub occurrences: Vec<Occurrence>,
    pub external_frequency: usize,
}

/// Whether two source spans overlap enough to belong to one cluster.
pub fn spans_merge(a: &Span, b: &Span) -> bool {
    let shorter = a.len().min(b.len());
    shorter > 0 && a.overlap(b) as f64 >= MERGE_OVERLAP * shorter as f64
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Clusters matches of one source document by overlap of their source
/// spans. `source_text` supplies each cluster's canonical text, the union of
/// its members' source spans.
pub fn cluster_reuses(
    matches: &[AlignmentMatch],
    source_work: &str,
    source_text: &str,
) -> Vec<ReuseCluster> {
    let n = matches.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (matches[i].query_span.start, matches[i].query_span.end, i));

    // sweep in start order; only spans that intersect can merge
    let mut sets = DisjointSet::new(n);
    let mut active: Vec<usize> = Vec::new();
    for &i in &order {
        let span = matches[i].query_span;
        active.retain(|&a| matches[a].query_span.end > span.start);
        for &a in &active {
            if spans_merge(&matches[a].query_span, &span) {
                sets.union(a, i);
            }
        }
        active.push(i);
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = sets.find(i);
        groups.entry(root).or_default().push(i);
    }
    let mut groups: Vec<(Span, Vec<usize>)> = groups
        .into_values()
        .map(|members| {
            let start = members
                .iter()
                .map(|&i| matches[i].query_span.start)
                .min()
                .unwrap();
            let end = members
                .iter()
                .map(|&i| matches[i].query_span.end)
                .max()
                .unwrap();
            (Span::new(start, end), members)
        })
        .collect();
    groups.sort_by_key(|(span, _)| (span.start, span.end));

    let source_chars: Vec<char> = source_text.chars().collect();
    groups
        .into_iter()
        .enumerate()
        .map(|(idx, (span, members))| {
            let mut occurrences: Vec<Occurrence> = members
                .iter()
                .map(|&i| Occurrence {
                    doc_id: matches[i].target_doc.clone(),
                    work_id: matches[i].target_work.clone(),
                    span: matches[i].target_span,
                    source_span: matches[i].query_span,
                })
                .collect();
            occurrences.sort_by(|a, b| a.doc_id.cmp(&b.doc_id).then(a.span.cmp(&b.span)));
            let external_frequency = occurrences
                .iter()
                .filter(|o| o.work_id != source_work)
                .count();
            let end = span.end.min(source_chars.len());
            let start = span.start.min(end);
            ReuseCluster {
                cluster_id: format!("{source_work}-c{idx:05}"),
                source_work: source_work.to_owned(),
                source_span: span,
                canonical_text: source_chars[start..end].iter().collect(),
                occurrences,
                external_frequency,
            }
        })
        .collect()
}
