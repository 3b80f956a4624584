//! Exact flat top-k cosine index.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{parse_chunk_id, Chunk};
use crate::embed::{dot, VectorSet};
use crate::error::{Error, Result};

/// One retrieved chunk for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHit {
    pub query_id: String,
    pub chunk_id: String,
    pub doc_id: String,
    pub work_id: String,
    pub score: f32,
    pub rank: usize,
}

/// Immutable full-scan index. Vectors are unit-norm, so the inner product is
/// the cosine similarity.
#[derive(Debug, Clone)]
pub struct FlatIndex {
    vectors: VectorSet,
    // lexicographic position of each id, for integer tie-breaking
    id_order: Vec<u32>,
    locations: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy)]
struct Scored {
    score: f32,
    order: u32,
    slot: u32,
}

impl Scored {
    /// `Less` when `self` ranks ahead of `other`.
    fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.order.cmp(&other.order))
    }
}

// The heap keeps the worst retained candidate on top.
impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank_cmp(other)
    }
}
impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Scored {}

impl FlatIndex {
    /// Builds an index whose hits carry document ids parsed from the chunk
    /// ids. Use [`FlatIndex::with_chunks`] to attach work ids.
    pub fn build(vectors: VectorSet) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let mut seen = HashSet::with_capacity(vectors.len());
        for id in vectors.ids() {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let mut sorted: Vec<usize> = (0..vectors.len()).collect();
        sorted.sort_by(|&a, &b| vectors.ids()[a].cmp(&vectors.ids()[b]));
        let mut id_order = vec![0u32; vectors.len()];
        for (pos, &i) in sorted.iter().enumerate() {
            id_order[i] = pos as u32;
        }
        let locations = vectors
            .ids()
            .iter()
            .map(|id| {
                let doc = parse_chunk_id(id).map_or(id.as_str(), |(d, _)| d);
                (doc.to_owned(), String::new())
            })
            .collect();
        Ok(Self {
            vectors,
            id_order,
            locations,
        })
    }

    /// Attaches doc and work ids from the chunk table.
    pub fn with_chunks(mut self, chunks: &[Chunk]) -> Self {
        let by_id: HashMap<&str, &Chunk> =
            chunks.iter().map(|c| (c.chunk_id.as_str(), c)).collect();
        for (i, id) in self.vectors.ids().iter().enumerate() {
            if let Some(c) = by_id.get(id.as_str()) {
                self.locations[i] = (c.doc_id.clone(), c.work_id.clone());
            }
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    fn top_k(&self, query: &[f32], k: usize) -> Vec<Scored> {
        let k = k.min(self.len());
        let mut heap: BinaryHeap<Scored> = BinaryHeap::with_capacity(k + 1);
        for slot in 0..self.len() {
            let cand = Scored {
                score: dot(self.vectors.vector(slot), query),
                order: self.id_order[slot],
                slot: slot as u32,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if let Some(worst) = heap.peek() {
                if cand.rank_cmp(worst) == Ordering::Less {
                    heap.pop();
                    heap.push(cand);
                }
            }
        }
        let mut out = heap.into_vec();
        out.sort_by(Scored::rank_cmp);
        out
    }

    /// Returns the `k` most similar vectors (all of them if fewer), ranked
    /// from 1. Equal scores are ordered by ascending chunk id.
    pub fn search(&self, query_id: &str, query: &[f32], k: usize) -> Result<Vec<RankedHit>> {
        if query.len() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                found: query.len(),
            });
        }
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(self
            .top_k(query, k)
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let slot = s.slot as usize;
                let (doc_id, work_id) = &self.locations[slot];
                RankedHit {
                    query_id: query_id.to_owned(),
                    chunk_id: self.vectors.ids()[slot].clone(),
                    doc_id: doc_id.clone(),
                    work_id: work_id.clone(),
                    score: s.score,
                    rank: i + 1,
                }
            })
            .collect())
    }

    /// Searches every query vector in parallel; one result list per query,
    /// in query order.
    pub fn search_all(&self, queries: &VectorSet, k: usize) -> Result<Vec<Vec<RankedHit>>> {
        if queries.dim() != self.dim() && !queries.is_empty() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                found: queries.dim(),
            });
        }
        queries
            .iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|(id, q)| self.search(id, q, k))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::l2_norm;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(mut v: Vec<f32>) -> Vec<f32> {
        let n = l2_norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        v
    }

    fn random_set(seed: u64, n: usize, dim: usize) -> VectorSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = VectorSet::new(dim);
        for i in 0..n {
            let v = unit((0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect());
            set.push(format!("c{i:05}"), &v).unwrap();
        }
        set
    }

    /// Full scan, full sort.
    fn oracle(set: &VectorSet, q: &[f32], k: usize) -> Vec<String> {
        let mut all: Vec<(f32, &str)> = set
            .iter()
            .map(|(id, v)| {
                let mut s = 0f32;
                for i in 0..v.len() {
                    s += v[i] * q[i];
                }
                (s, id)
            })
            .collect();
        all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        all.into_iter()
            .take(k)
            .map(|(_, id)| id.to_owned())
            .collect()
    }

    #[test]
    fn build_counts_and_rejects() {
        let set = random_set(1, 20, 8);
        assert_eq!(FlatIndex::build(set.clone()).unwrap().len(), 20);
        assert!(matches!(
            FlatIndex::build(VectorSet::new(8)),
            Err(Error::EmptyIndex)
        ));
        let mut dup = VectorSet::new(2);
        dup.push("a", &[1.0, 0.0]).unwrap();
        dup.push("a", &[0.0, 1.0]).unwrap();
        assert!(matches!(FlatIndex::build(dup), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn identical_query_ranks_first() {
        let set = random_set(2, 100, 16);
        let q = set.vector(42).to_vec();
        let index = FlatIndex::build(set).unwrap();
        let hits = index.search("q", &q, 5).unwrap();
        assert_eq!(hits[0].chunk_id, "c00042");
        assert!((hits[0].score - 1.0).abs() < 1e-5);
        assert_eq!(hits[0].rank, 1);
    }

    #[test]
    fn saturates_and_validates() {
        let index = FlatIndex::build(random_set(3, 7, 4)).unwrap();
        let q = unit(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(index.search("q", &q, 100).unwrap().len(), 7);
        assert!(index.search("q", &q, 0).is_err());
        assert!(matches!(
            index.search("q", &[1.0, 0.0], 1),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn ties_break_by_chunk_id() {
        let mut set = VectorSet::new(2);
        for id in ["d#2", "b#0", "c#1", "a#9"] {
            set.push(id, &[1.0, 0.0]).unwrap();
        }
        set.push("z#0", &[0.0, 1.0]).unwrap();
        let index = FlatIndex::build(set).unwrap();
        let ids: Vec<_> = index
            .search("q", &[1.0, 0.0], 3)
            .unwrap()
            .into_iter()
            .map(|h| h.chunk_id)
            .collect();
        assert_eq!(ids, ["a#9", "b#0", "c#1"]);
    }

    #[test]
    fn work_ids_come_from_chunks() {
        let mut set = VectorSet::new(2);
        set.push("doc#0", &[1.0, 0.0]).unwrap();
        let chunk = Chunk {
            chunk_id: "doc#0".into(),
            doc_id: "doc".into(),
            work_id: "W9".into(),
            token_start: 0,
            token_end: 1,
            char_start: 0,
            char_end: 1,
            text: "x".into(),
        };
        let index = FlatIndex::build(set).unwrap().with_chunks(&[chunk]);
        let hit = &index.search("q", &[1.0, 0.0], 1).unwrap()[0];
        assert_eq!((hit.doc_id.as_str(), hit.work_id.as_str()), ("doc", "W9"));
    }

    #[test]
    fn matches_brute_force_on_random_vectors() {
        let set = random_set(4, 1000, 32);
        let queries = random_set(5, 50, 32);
        let index = FlatIndex::build(set.clone()).unwrap();
        for (qid, q) in queries.iter() {
            let got: Vec<_> = index
                .search(qid, q, 25)
                .unwrap()
                .into_iter()
                .map(|h| h.chunk_id)
                .collect();
            assert_eq!(got, oracle(&set, q, 25));
        }
    }

    #[test]
    fn search_all_is_order_independent() {
        let index = FlatIndex::build(random_set(6, 200, 8)).unwrap();
        let queries = random_set(7, 10, 8);
        let forward = index.search_all(&queries, 10).unwrap();
        let mut reversed = VectorSet::new(8);
        for i in (0..queries.len()).rev() {
            reversed
                .push(queries.ids()[i].clone(), queries.vector(i))
                .unwrap();
        }
        let mut backward = index.search_all(&reversed, 10).unwrap();
        backward.reverse();
        assert_eq!(forward, backward);
    }

    proptest! {
        #[test]
        fn exact_and_monotone(seed in 0u64..1000, n in 1usize..120, k in 1usize..40) {
            let set = random_set(seed, n, 6);
            let q = random_set(seed + 10_000, 1, 6);
            let index = FlatIndex::build(set.clone()).unwrap();
            let hits = index.search("q", q.vector(0), k).unwrap();
            prop_assert_eq!(hits.len(), k.min(n));
            for (i, h) in hits.iter().enumerate() {
                prop_assert_eq!(h.rank, i + 1);
            }
            for w in hits.windows(2) {
                prop_assert!(w[0].score >= w[1].score);
            }
            let ids: Vec<_> = hits.into_iter().map(|h| h.chunk_id).collect();
            prop_assert_eq!(ids, oracle(&set, q.vector(0), k));
        }
    }
}
