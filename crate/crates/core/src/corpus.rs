//! Document ingestion, tokenization and fixed-budget chunking.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CHUNK_SIZE: usize = 100;

/// One ingested document with its bibliographic metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub work_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub author: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default)]
    pub genre: String,
    #[serde(default)]
    pub declared_language: String,
    pub text: String,
}

/// A contiguous run of tokens from one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub work_id: String,
    pub token_start: usize,
    pub token_end: usize,
    /// Character offsets of the chunk's surface text within the document.
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

impl Chunk {
    pub fn token_count(&self) -> usize {
        self.token_end - self.token_start
    }
}

/// Builds a chunk id from a document id and zero-based sequence number.
pub fn chunk_id(doc_id: &str, seq: usize) -> String {
    format!("{doc_id}#{seq}")
}

/// Splits a chunk id back into `(doc_id, seq)`.
pub fn parse_chunk_id(id: &str) -> Option<(&str, usize)> {
    let (doc, seq) = id.rsplit_once('#')?;
    Some((doc, seq.parse().ok()?))
}

#[derive(Deserialize)]
struct RawRecord {
    doc_id: Option<String>,
    work_id: Option<String>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    author: Option<String>,
    #[serde(default)]
    year: Option<i64>,
    #[serde(default)]
    genre: Option<String>,
    #[serde(default)]
    declared_language: Option<String>,
    text: Option<String>,
}

/// Reads a JSONL document stream. Records come back in input order.
pub fn ingest<R: Read>(source: R) -> Result<Vec<DocumentRecord>> {
    let mut docs = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in BufReader::new(source).lines().enumerate() {
        let line_no = idx + 1;
        let malformed = |message: String| Error::MalformedLine {
            line: line_no,
            message,
        };
        let line = line.map_err(|e| malformed(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let doc_id = raw
            .doc_id
            .filter(|s| !s.is_empty())
            .ok_or_else(|| malformed("missing doc_id".into()))?;
        let work_id = raw
            .work_id
            .filter(|s| !s.is_empty())
            .ok_or_else(|| malformed("missing work_id".into()))?;
        let text = raw.text.ok_or_else(|| malformed("missing text".into()))?;
        let year = match raw.year {
            None => None,
            Some(y) if y > 0 && y <= i32::MAX as i64 => Some(y as i32),
            Some(y) => {
                return Err(malformed(format!(
                    "year must be a positive integer, got {y}"
                )))
            }
        };
        if let Some(&first_line) = seen.get(&doc_id) {
            return Err(Error::DuplicateDocId {
                doc_id,
                first_line,
                second_line: line_no,
            });
        }
        seen.insert(doc_id.clone(), line_no);
        docs.push(DocumentRecord {
            doc_id,
            work_id,
            title: raw.title.unwrap_or_default(),
            author: raw.author.unwrap_or_default(),
            year,
            genre: raw.genre.unwrap_or_default(),
            declared_language: raw.declared_language.unwrap_or_default(),
            text,
        });
    }
    Ok(docs)
}

/// A token with its position in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenSpan {
    pub char_start: usize,
    pub char_end: usize,
    pub byte_start: usize,
    pub byte_end: usize,
}

impl TokenSpan {
    pub fn as_str<'a>(&self, text: &'a str) -> &'a str {
        &text[self.byte_start..self.byte_end]
    }
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

const MAX_CLITIC_LEN: usize = 3;

/// Tokenizes `text`, returning each token's character and byte span.
///
/// Whitespace separates words. Leading and trailing punctuation characters
/// each become their own token, and a short alphabetic suffix after an
/// apostrophe (`'s`, `'ll`, `'d`) is split from its stem.
pub fn tokenize_spans(text: &str) -> Vec<TokenSpan> {
    let mut spans = Vec::new();
    let mut chars = text.char_indices().enumerate().peekable();
    while let Some(&(_, (_, c))) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        // (char index, byte index, char) for one whitespace-delimited word
        let mut word: Vec<(usize, usize, char)> = Vec::new();
        while let Some(&(ci, (bi, c))) = chars.peek() {
            if c.is_whitespace() {
                break;
            }
            word.push((ci, bi, c));
            chars.next();
        }
        split_word(&word, &mut spans);
    }
    spans
}

fn split_word(word: &[(usize, usize, char)], out: &mut Vec<TokenSpan>) {
    let single = |i: usize| {
        let (ci, bi, c) = word[i];
        TokenSpan {
            char_start: ci,
            char_end: ci + 1,
            byte_start: bi,
            byte_end: bi + c.len_utf8(),
        }
    };
    let range = |from: usize, to: usize| {
        let (cs, bs, _) = word[from];
        let (ce, be, c) = word[to - 1];
        TokenSpan {
            char_start: cs,
            char_end: ce + 1,
            byte_start: bs,
            byte_end: be + c.len_utf8(),
        }
    };

    let mut lo = 0;
    let mut hi = word.len();
    while lo < hi && is_punct(word[lo].2) {
        out.push(single(lo));
        lo += 1;
    }
    let mut trailing = Vec::new();
    while hi > lo && is_punct(word[hi - 1].2) {
        hi -= 1;
        trailing.push(single(hi));
    }
    if lo < hi {
        let core = &word[lo..hi];
        let clitic = core
            .iter()
            .rposition(|&(_, _, c)| is_apostrophe(c))
            .filter(|&p| {
                let suffix = &core[p + 1..];
                p > 0
                    && !suffix.is_empty()
                    && suffix.len() <= MAX_CLITIC_LEN
                    && suffix.iter().all(|&(_, _, c)| c.is_alphabetic())
            });
        match clitic {
            Some(p) => {
                out.push(range(lo, lo + p));
                out.push(range(lo + p, hi));
            }
            None => out.push(range(lo, hi)),
        }
    }
    out.extend(trailing.into_iter().rev());
}

pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_spans(text)
        .iter()
        .map(|s| s.as_str(text).to_owned())
        .collect()
}

/// Tiles a document into non-overlapping chunks of at most `chunk_size`
/// tokens. Only the final chunk may be short.
pub fn chunk_document(doc: &DocumentRecord, chunk_size: usize) -> Result<Vec<Chunk>> {
    if chunk_size == 0 {
        return Err(Error::InvalidParameter(
            "chunk_size must be at least 1".into(),
        ));
    }
    let spans = tokenize_spans(&doc.text);
    Ok(spans
        .chunks(chunk_size)
        .enumerate()
        .map(|(seq, group)| {
            let first = group[0];
            let last = group[group.len() - 1];
            let token_start = seq * chunk_size;
            Chunk {
                chunk_id: chunk_id(&doc.doc_id, seq),
                doc_id: doc.doc_id.clone(),
                work_id: doc.work_id.clone(),
                token_start,
                token_end: token_start + group.len(),
                char_start: first.char_start,
                char_end: last.char_end,
                text: doc.text[first.byte_start..last.byte_end].to_owned(),
            }
        })
        .collect())
}

/// Chunks every document, in document order.
pub fn chunk_corpus(docs: &[DocumentRecord], chunk_size: usize) -> Result<Vec<Chunk>> {
    use rayon::prelude::*;
    let per_doc: Vec<Vec<Chunk>> = docs
        .par_iter()
        .map(|d| chunk_document(d, chunk_size))
        .collect::<Result<_>>()?;
    Ok(per_doc.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(text: &str) -> DocumentRecord {
        DocumentRecord {
            doc_id: "d1".into(),
            work_id: "w1".into(),
            title: String::new(),
            author: String::new(),
            year: None,
            genre: String::new(),
            declared_language: String::new(),
            text: text.into(),
        }
    }

    fn words(n: usize) -> String {
        (0..n)
            .map(|i| format!("w{i}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn ingest_empty() {
        assert!(ingest("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn ingest_preserves_order_and_defaults() {
        let input = r#"{"doc_id":"a","work_id":"W1","text":"x"}
{"doc_id":"b","work_id":"W2","text":"y","year":1740,"author":"Hume"}
{"doc_id":"c","work_id":"W1","text":"z"}
"#;
        let docs = ingest(input.as_bytes()).unwrap();
        let ids: Vec<_> = docs.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(docs[0].author, "");
        assert_eq!(docs[0].year, None);
        assert_eq!(docs[1].year, Some(1740));
    }

    #[test]
    fn ingest_missing_doc_id_cites_line() {
        let input = "{\"doc_id\":\"a\",\"work_id\":\"W\",\"text\":\"\"}\n{\"work_id\":\"W\",\"text\":\"\"}\n";
        match ingest(input.as_bytes()) {
            Err(Error::MalformedLine { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("doc_id"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ingest_duplicate_names_both_lines() {
        let input = "{\"doc_id\":\"a\",\"work_id\":\"W\",\"text\":\"\"}\n{\"doc_id\":\"b\",\"work_id\":\"W\",\"text\":\"\"}\n{\"doc_id\":\"a\",\"work_id\":\"W\",\"text\":\"\"}\n";
        match ingest(input.as_bytes()) {
            Err(Error::DuplicateDocId {
                first_line,
                second_line,
                ..
            }) => assert_eq!((first_line, second_line), (1, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ingest_rejects_garbage_and_bad_year() {
        assert!(matches!(
            ingest("not json\n".as_bytes()),
            Err(Error::MalformedLine { line: 1, .. })
        ));
        let bad_year = "{\"doc_id\":\"a\",\"work_id\":\"W\",\"text\":\"\",\"year\":-3}\n";
        assert!(matches!(
            ingest(bad_year.as_bytes()),
            Err(Error::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("Mr. Locke's Essay"),
            ["Mr", ".", "Locke", "'s", "Essay"]
        );
        assert_eq!(tokenize("a  b"), ["a", "b"]);
        assert_eq!(tokenize("(ideas),"), ["(", "ideas", ")", ","]);
        assert_eq!(tokenize("o'clock"), ["o'clock"]);
        assert_eq!(tokenize("“Motion”"), ["“", "Motion", "”"]);
    }

    #[test]
    fn tokenize_keeps_case() {
        assert_eq!(tokenize("IDEAS Ideas"), ["IDEAS", "Ideas"]);
    }

    #[test]
    fn chunk_examples() {
        let c = chunk_document(&doc(&words(250)), 100).unwrap();
        let spans: Vec<_> = c.iter().map(|c| (c.token_start, c.token_end)).collect();
        assert_eq!(spans, [(0, 100), (100, 200), (200, 250)]);
        assert_eq!(c[2].chunk_id, "d1#2");
        assert_eq!(chunk_document(&doc(&words(100)), 100).unwrap().len(), 1);
        assert!(chunk_document(&doc(""), 100).unwrap().is_empty());
        assert!(chunk_document(&doc("x"), 0).is_err());
    }

    #[test]
    fn chunk_text_is_surface_slice() {
        let d = doc("Alpha beta, gamma.\n\nDelta epsilon");
        let c = chunk_document(&d, 3).unwrap();
        assert_eq!(c[0].text, "Alpha beta,");
        assert_eq!(c[1].text, "gamma.\n\nDelta");
        assert_eq!(c[2].text, "epsilon");
        let chars: Vec<char> = d.text.chars().collect();
        for ch in &c {
            let slice: String = chars[ch.char_start..ch.char_end].iter().collect();
            assert_eq!(slice, ch.text);
        }
    }

    #[test]
    fn parse_chunk_ids() {
        assert_eq!(parse_chunk_id("a#b#12"), Some(("a#b", 12)));
        assert_eq!(parse_chunk_id("nohash"), None);
    }

    proptest! {
        #[test]
        fn chunks_tile_tokens(text in "[a-zA-Z.,'! ]{0,400}", size in 1usize..40) {
            let d = doc(&text);
            let tokens = tokenize(&text);
            let chunks = chunk_document(&d, size).unwrap();
            prop_assert_eq!(chunks.len(), tokens.len().div_ceil(size));
            let mut rebuilt = Vec::new();
            let mut expected_start = 0;
            for (i, c) in chunks.iter().enumerate() {
                prop_assert_eq!(c.token_start, expected_start);
                prop_assert!(c.token_count() >= 1 && c.token_count() <= size);
                if i + 1 < chunks.len() {
                    prop_assert_eq!(c.token_count(), size);
                }
                expected_start = c.token_end;
                rebuilt.extend_from_slice(&tokens[c.token_start..c.token_end]);
            }
            prop_assert_eq!(rebuilt, tokens);
        }

        #[test]
        fn tokens_cover_all_non_whitespace(text in "\\PC{0,200}") {
            let spans = tokenize_spans(&text);
            let covered: String = spans.iter().map(|s| s.as_str(&text)).collect();
            let expected: String = text.chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(covered, expected);
        }

        #[test]
        fn ingest_is_deterministic(ids in proptest::collection::btree_set("[a-z]{1,6}", 0..8)) {
            let input: String = ids
                .iter()
                .map(|id| format!("{{\"doc_id\":\"{id}\",\"work_id\":\"w\",\"text\":\"t {id}\"}}\n"))
                .collect();
            prop_assert_eq!(ingest(input.as_bytes()).unwrap(), ingest(input.as_bytes()).unwrap());
        }
    }
}
