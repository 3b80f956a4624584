//! Seed-and-extend local alignment over characters.
//!
//! Exact `seed_len`-grams shared by query and target anchor an ungapped
//! X-drop probe; probes that look promising are re-extended with a gapped
//! X-drop dynamic program in both directions from the seed.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignParams {
    pub seed_len: usize,
    pub match_score: i32,
    pub mismatch_score: i32,
    pub gap_score: i32,
    pub x_drop: i32,
    pub min_score: i32,
}

impl Default for AlignParams {
    fn default() -> Self {
        Self {
            seed_len: 5,
            match_score: 1,
            mismatch_score: -1,
            gap_score: -2,
            x_drop: 10,
            min_score: 30,
        }
    }
}

impl AlignParams {
    pub fn validate(&self) -> Result<()> {
        if self.seed_len < 3 {
            return Err(Error::InvalidParameter(format!(
                "seed_len must be at least 3, got {}",
                self.seed_len
            )));
        }
        if self.match_score <= 0 || self.mismatch_score >= 0 || self.gap_score >= 0 {
            return Err(Error::InvalidParameter(
                "match score must be positive, mismatch and gap scores negative".into(),
            ));
        }
        if self.x_drop < 0 {
            return Err(Error::InvalidParameter(
                "x_drop must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn substitution(&self, a: char, b: char) -> i32 {
        if a == b {
            self.match_score
        } else {
            self.mismatch_score
        }
    }

    /// Ungapped probe score needed before running the gapped extension.
    fn gapped_trigger(&self) -> i32 {
        (self.min_score / 2).max(self.seed_len as i32 * self.match_score)
    }
}

/// Half-open character range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlap(&self, other: &Span) -> usize {
        self.end
            .min(other.end)
            .saturating_sub(self.start.max(other.start))
    }

    pub fn contains(&self, pos: usize) -> bool {
        self.start <= pos && pos < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMatch {
    pub query_doc: String,
    pub target_doc: String,
    #[serde(default)]
    pub target_work: String,
    pub query_span: Span,
    pub target_span: Span,
    pub score: i32,
    pub identity: f64,
}

/// Result of extending in one direction from an anchor.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Extension {
    pub score: i32,
    pub a_len: usize,
    pub b_len: usize,
    pub matches: usize,
    pub columns: usize,
}

const NEG: i32 = i32::MIN / 4;

struct Row {
    lo: usize,
    vals: Vec<i32>,
}

impl Row {
    fn get(&self, j: usize) -> i32 {
        if j < self.lo {
            return NEG;
        }
        self.vals.get(j - self.lo).copied().unwrap_or(NEG)
    }
}

/// Gapped X-drop extension of `a` against `b`, both read from index 0.
/// Cells scoring more than `x_drop` below the best seen so far are pruned.
pub fn xdrop_extend(a: &[char], b: &[char], p: &AlignParams) -> Extension {
    let mut rows: Vec<Row> = Vec::new();
    let mut best = 0;
    let mut best_cell = (0usize, 0usize);

    // row 0: only gaps in `a`
    let mut first = vec![0];
    let mut j = 0;
    while j < b.len() {
        let v = first[j] + p.gap_score;
        if v < best - p.x_drop {
            break;
        }
        first.push(v);
        j += 1;
    }
    rows.push(Row { lo: 0, vals: first });

    for i in 1..=a.len() {
        let prev = &rows[i - 1];
        let lo = prev.lo;
        let mut vals: Vec<i32> = Vec::new();
        let mut j = lo;
        loop {
            if j > b.len() {
                break;
            }
            let mut v = prev.get(j).saturating_add(p.gap_score);
            if j > 0 {
                let diag = prev.get(j - 1);
                if diag > NEG {
                    v = v.max(diag + p.substitution(a[i - 1], b[j - 1]));
                }
                if j > lo {
                    let left = vals[j - 1 - lo];
                    if left > NEG {
                        v = v.max(left + p.gap_score);
                    }
                }
            }
            if v < best - p.x_drop || v <= NEG {
                v = NEG;
            }
            let past_prev = j >= prev.lo + prev.vals.len();
            if v == NEG && past_prev {
                break;
            }
            vals.push(v);
            j += 1;
        }
        // trim pruned cells from both ends
        let first_live = vals.iter().position(|&v| v > NEG);
        let Some(first_live) = first_live else {
            break;
        };
        let last_live = vals.iter().rposition(|&v| v > NEG).unwrap();
        let row = Row {
            lo: lo + first_live,
            vals: vals[first_live..=last_live].to_vec(),
        };
        for (off, &v) in row.vals.iter().enumerate() {
            if v > best {
                best = v;
                best_cell = (i, row.lo + off);
            }
        }
        rows.push(row);
    }

    // traceback from the best cell
    let (mut i, mut j) = best_cell;
    let (mut matches, mut columns) = (0, 0);
    let mut cur = best;
    while i > 0 || j > 0 {
        columns += 1;
        if i > 0 && j > 0 {
            let s = p.substitution(a[i - 1], b[j - 1]);
            let d = rows[i - 1].get(j - 1);
            if d > NEG && d + s == cur {
                if a[i - 1] == b[j - 1] {
                    matches += 1;
                }
                cur = d;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 {
            let u = rows[i - 1].get(j);
            if u > NEG && u + p.gap_score == cur {
                cur = u;
                i -= 1;
                continue;
            }
        }
        cur = rows[i].get(j - 1);
        j -= 1;
    }
    Extension {
        score: best,
        a_len: best_cell.0,
        b_len: best_cell.1,
        matches,
        columns,
    }
}

/// Ungapped X-drop probe to the right of an anchor; returns (best score,
/// length at best).
fn ungapped_right(a: &[char], b: &[char], p: &AlignParams) -> (i32, usize) {
    let (mut score, mut best, mut best_len) = (0, 0, 0);
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        score += p.substitution(*x, *y);
        if score > best {
            best = score;
            best_len = k + 1;
        } else if score < best - p.x_drop {
            break;
        }
    }
    (best, best_len)
}

fn ungapped_left(a: &[char], b: &[char], p: &AlignParams) -> (i32, usize) {
    let (mut score, mut best, mut best_len) = (0, 0, 0);
    for (k, (x, y)) in a.iter().rev().zip(b.iter().rev()).enumerate() {
        score += p.substitution(*x, *y);
        if score > best {
            best = score;
            best_len = k + 1;
        } else if score < best - p.x_drop {
            break;
        }
    }
    (best, best_len)
}

/// Lowercases one char to one char so offsets stay aligned with the source.
pub fn fold_chars(text: &str) -> Vec<char> {
    text.chars()
        .map(|c| c.to_lowercase().next().unwrap_or(c))
        .collect()
}

/// Query side prepared once and reused against many targets.
pub struct PreparedQuery {
    chars: Vec<char>,
    seeds: HashMap<Vec<char>, Vec<usize>>,
    params: AlignParams,
}

impl PreparedQuery {
    pub fn new(query_text: &str, params: AlignParams) -> Self {
        let chars = fold_chars(query_text);
        let mut seeds: HashMap<Vec<char>, Vec<usize>> = HashMap::new();
        if chars.len() >= params.seed_len {
            for (pos, w) in chars.windows(params.seed_len).enumerate() {
                seeds.entry(w.to_vec()).or_default().push(pos);
            }
        }
        Self {
            chars,
            seeds,
            params,
        }
    }
}

/// Raw local alignment between the prepared query and one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalHit {
    pub query_span: Span,
    pub target_span: Span,
    pub score: i32,
    pub identity: f64,
}

impl PreparedQuery {
    pub fn align(&self, target_text: &str) -> Vec<LocalHit> {
        let target = fold_chars(target_text);
        self.align_chars(&target)
    }

    fn align_chars(&self, target: &[char]) -> Vec<LocalHit> {
        let p = &self.params;
        let k = p.seed_len;
        let q = &self.chars;
        if target.len() < k || q.len() < k {
            return Vec::new();
        }
        let trigger = p.gapped_trigger();
        // furthest target position already probed on each diagonal
        let mut probed: HashMap<isize, usize> = HashMap::new();
        let mut found: Vec<LocalHit> = Vec::new();

        for (t, w) in target.windows(k).enumerate() {
            let Some(qpositions) = self.seeds.get(w) else {
                continue;
            };
            for &qp in qpositions {
                let diag = t as isize - qp as isize;
                if probed.get(&diag).is_some_and(|&end| t < end) {
                    continue;
                }
                if found
                    .iter()
                    .any(|h| h.query_span.contains(qp) && h.target_span.contains(t))
                {
                    continue;
                }
                let (rs, rlen) = ungapped_right(&q[qp..], &target[t..], p);
                let (ls, _) = ungapped_left(&q[..qp], &target[..t], p);
                probed.insert(diag, t + rlen.max(k));
                if rs + ls < trigger {
                    continue;
                }

                let right = xdrop_extend(&q[qp..], &target[t..], p);
                let qrev: Vec<char> = q[..qp].iter().rev().copied().collect();
                let trev: Vec<char> = target[..t].iter().rev().copied().collect();
                let left = xdrop_extend(&qrev, &trev, p);
                let score = left.score + right.score;
                let query_span = Span::new(qp - left.a_len, qp + right.a_len);
                let target_span = Span::new(t - left.b_len, t + right.b_len);
                let columns = left.columns + right.columns;
                let identity = if columns == 0 {
                    0.0
                } else {
                    (left.matches + right.matches) as f64 / columns as f64
                };
                probed.insert(diag, (t + rlen.max(k)).max(target_span.end));
                found.push(LocalHit {
                    query_span,
                    target_span,
                    score,
                    identity,
                });
            }
        }
        suppress_overlaps(found, p.min_score)
    }
}

/// Keeps the best-scoring hits, dropping any hit that overlaps a kept one on
/// both the query and the target side.
fn suppress_overlaps(mut hits: Vec<LocalHit>, min_score: i32) -> Vec<LocalHit> {
    hits.retain(|h| h.score >= min_score && !h.query_span.is_empty() && !h.target_span.is_empty());
    hits.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then(a.target_span.start.cmp(&b.target_span.start))
            .then(a.query_span.start.cmp(&b.query_span.start))
    });
    let mut kept: Vec<LocalHit> = Vec::new();
    for h in hits {
        let clash = kept.iter().any(|k| {
            k.query_span.overlap(&h.query_span) > 0 && k.target_span.overlap(&h.target_span) > 0
        });
        if !clash {
            kept.push(h);
        }
    }
    kept.sort_by_key(|h| (h.target_span.start, h.query_span.start));
    kept
}

/// Finds lexical reuse of `query_text` across `corpus`.
pub fn detect_reuse(
    query_doc: &str,
    query_text: &str,
    corpus: &[DocumentRecord],
    params: &AlignParams,
) -> Result<Vec<AlignmentMatch>> {
    params.validate()?;
    if query_text.is_empty() {
        return Err(Error::InvalidParameter("query text is empty".into()));
    }
    let prepared = PreparedQuery::new(query_text, *params);
    let per_doc: Vec<Vec<AlignmentMatch>> = corpus
        .par_iter()
        .map(|doc| {
            prepared
                .align(&doc.text)
                .into_iter()
                .map(|h| AlignmentMatch {
                    query_doc: query_doc.to_owned(),
                    target_doc: doc.doc_id.clone(),
                    target_work: doc.work_id.clone(),
                    query_span: h.query_span,
                    target_span: h.target_span,
                    score: h.score,
                    identity: h.identity,
                })
                .collect()
        })
        .collect();
    Ok(per_doc.into_iter().flatten().collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Smith-Waterman with linear gaps: the best local score between `a` and `b`.
    pub(crate) fn smith_waterman(a: &[char], b: &[char], p: &AlignParams) -> i32 {
        let mut prev = vec![0i32; b.len() + 1];
        let mut best = 0;
        for i in 1..=a.len() {
            let mut cur = vec![0i32; b.len() + 1];
            for j in 1..=b.len() {
                let s = if a[i - 1] == b[j - 1] {
                    p.match_score
                } else {
                    p.mismatch_score
                };
                cur[j] = 0
                    .max(prev[j - 1] + s)
                    .max(prev[j] + p.gap_score)
                    .max(cur[j - 1] + p.gap_score);
                best = best.max(cur[j]);
            }
            prev = cur;
        }
        best
    }

    pub(crate) fn random_text(rng: &mut ChaCha8Rng, n: usize) -> String {
        const ALPHA: &[u8] = b"abcdefghijklmnopqrstuvwxyz     ";
        (0..n)
            .map(|_| ALPHA[rng.gen_range(0..ALPHA.len())] as char)
            .collect()
    }

    pub(crate) fn corrupt(rng: &mut ChaCha8Rng, text: &str, rate: f64) -> String {
        let mut chars: Vec<char> = text.chars().collect();
        let n = (chars.len() as f64 * rate).round() as usize;
        let positions = rand::seq::index::sample(rng, chars.len(), n);
        for pos in positions.iter() {
            let orig = chars[pos];
            loop {
                let c = (b'a' + rng.gen_range(0..26u8)) as char;
                if c != orig {
                    chars[pos] = c;
                    break;
                }
            }
        }
        chars.into_iter().collect()
    }

    fn doc(id: &str, text: &str) -> DocumentRecord {
        DocumentRecord {
            doc_id: id.into(),
            work_id: format!("W-{id}"),
            title: String::new(),
            author: String::new(),
            year: None,
            genre: String::new(),
            declared_language: String::new(),
            text: text.into(),
        }
    }

    const QUOTE: &str = "Men being, as has been said, by nature all free, equal, and independent, no one can be put out of this estate without his own consent";

    #[test]
    fn verbatim_copy_is_one_full_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let text = format!(
            "{} {} {}",
            random_text(&mut rng, 300),
            QUOTE,
            random_text(&mut rng, 300)
        );
        let m = detect_reuse("src", QUOTE, &[doc("d", &text)], &AlignParams::default()).unwrap();
        assert_eq!(m.len(), 1);
        let n = QUOTE.chars().count();
        assert_eq!(m[0].query_span, Span::new(0, n));
        assert_eq!(m[0].target_span.len(), n);
        assert_eq!(m[0].identity, 1.0);
        assert_eq!(m[0].target_work, "W-d");
        assert!(m[0].score >= n as i32);
    }

    #[test]
    fn unrelated_text_yields_nothing() {
        let corpus = [doc("d", "qqqq zzzz xxxx wwww vvvv kkkk jjjj yyyy")];
        assert!(detect_reuse("src", QUOTE, &corpus, &AlignParams::default())
            .unwrap()
            .is_empty());
        assert!(detect_reuse("src", QUOTE, &[], &AlignParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn case_is_folded() {
        let upper = QUOTE.to_uppercase();
        let m = detect_reuse("src", QUOTE, &[doc("d", &upper)], &AlignParams::default()).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].identity, 1.0);
    }

    #[test]
    fn rejects_bad_params() {
        let p = AlignParams {
            seed_len: 2,
            ..AlignParams::default()
        };
        assert!(detect_reuse("s", QUOTE, &[], &p).is_err());
        assert!(detect_reuse("s", "", &[], &AlignParams::default()).is_err());
    }

    #[test]
    fn xdrop_extension_handles_gaps() {
        let p = AlignParams::default();
        let a: Vec<char> = "the nature of human understanding".chars().collect();
        let b: Vec<char> = "the nature of humman understanding".chars().collect();
        let ext = xdrop_extend(&a, &b, &p);
        assert_eq!(ext.a_len, a.len());
        assert_eq!(ext.b_len, b.len());
        assert_eq!(ext.score, a.len() as i32 + p.gap_score);
        assert_eq!(ext.score, smith_waterman(&a, &b, &p));
    }

    #[test]
    fn corrupted_copies_recovered_and_match_oracle_score() {
        let p = AlignParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..30 {
            let quote = random_text(&mut rng, 200);
            let planted = corrupt(&mut rng, &quote, 0.10);
            let text = format!(
                "{}{}{}",
                random_text(&mut rng, 150),
                planted,
                random_text(&mut rng, 150)
            );
            let m = detect_reuse("src", &quote, &[doc("d", &text)], &p).unwrap();
            let best = m.iter().max_by_key(|m| m.score).expect("match found");
            assert!(best.identity >= 0.85, "identity {}", best.identity);
            let q: Vec<char> =
                fold_chars(&quote)[best.query_span.start..best.query_span.end].to_vec();
            let t: Vec<char> =
                fold_chars(&text)[best.target_span.start..best.target_span.end].to_vec();
            assert_eq!(best.score, smith_waterman(&q, &t, &p));
        }
    }

    #[test]
    fn planted_exact_copies_at_min_score_length_are_found() {
        let p = AlignParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for len in [30usize, 31, 45, 80] {
            let quote = random_text(&mut rng, 300);
            let start = rng.gen_range(0..300 - len);
            let piece: String = quote.chars().skip(start).take(len).collect();
            let text = format!("QQQQQQ{piece}ZZZZZZ");
            let m = detect_reuse("src", &quote, &[doc("d", &text)], &p).unwrap();
            assert!(
                m.iter()
                    .any(|m| m.score >= len as i32 && m.target_span.len() >= len),
                "len {len}: {m:?}"
            );
        }
    }

    #[test]
    fn multiple_sites_in_one_document() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let text = format!(
            "{} {} {} {} {}",
            random_text(&mut rng, 100),
            QUOTE,
            random_text(&mut rng, 200),
            QUOTE,
            random_text(&mut rng, 100)
        );
        let m = detect_reuse("src", QUOTE, &[doc("d", &text)], &AlignParams::default()).unwrap();
        assert_eq!(m.len(), 2);
        assert!(m[0].target_span.end <= m[1].target_span.start);
    }
}
