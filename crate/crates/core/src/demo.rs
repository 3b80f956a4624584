//! Seeded synthetic corpus with planted reuse of a source work.
//!
//! The source document holds a handful of quote passages separated by
//! filler. Each passage is planted verbatim into several host works, loosely
//! rewritten into paraphrase works, and echoed by topical neighbours that
//! share part of its vocabulary. Everything else is noise. Words are
//! pronounceable nonce strings glued together with real English (and, for a
//! minority of documents, French) function words so that language detection
//! has something to go on.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotate::Label;
use crate::corpus::DocumentRecord;
use crate::reuse::{AlignParams, PreparedQuery, Span};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub quotes: usize,
    pub copies_per_quote: usize,
    pub paraphrases_per_quote: usize,
    pub topical_per_quote: usize,
    pub noise_docs: usize,
    /// Per-character substitution probability applied to every non-source
    /// document.
    pub ocr_rate: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            quotes: 8,
            copies_per_quote: 3,
            paraphrases_per_quote: 4,
            topical_per_quote: 3,
            noise_docs: 150,
            ocr_rate: 0.0,
        }
    }
}

impl DemoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quotes == 0 {
            return Err(Error::InvalidParameter(
                "demo needs at least one quote".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.ocr_rate) {
            return Err(Error::InvalidParameter(format!(
                "ocr_rate {} outside [0, 1]",
                self.ocr_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    Source,
    Verbatim,
    Paraphrase,
    LooseParaphrase,
    Topical,
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedDoc {
    pub doc_id: String,
    pub work_id: String,
    pub kind: PlantKind,
    /// Index of the planted quote this document relates to.
    pub quote: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedQuote {
    pub index: usize,
    /// Character span in the source document.
    pub source_span: Span,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub source_doc: String,
    pub source_work: String,
    pub quotes: Vec<PlantedQuote>,
    pub documents: Vec<PlantedDoc>,
}

impl GroundTruth {
    /// Index of the planted quote whose source span overlaps `span` most.
    pub fn quote_for_span(&self, span: &Span) -> Option<usize> {
        self.quotes
            .iter()
            .map(|q| (q.source_span.overlap(span), q.index))
            .filter(|&(o, _)| o > 0)
            .max()
            .map(|(_, i)| i)
    }

    pub fn doc(&self, doc_id: &str) -> Option<&PlantedDoc> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    /// The label an expert would give `doc_id` as a hit for quote `quote`.
    pub fn expected_label(&self, quote: usize, doc_id: &str) -> Label {
        match self.doc(doc_id) {
            Some(d) if d.quote == Some(quote) => match d.kind {
                PlantKind::Source | PlantKind::Verbatim | PlantKind::Paraphrase => {
                    Label::Paraphrase
                }
                PlantKind::LooseParaphrase => Label::MeaningMatch,
                PlantKind::Topical => Label::TopicalMatch,
                PlantKind::Noise => Label::NoMatch,
            },
            _ => Label::NoMatch,
        }
    }

    pub fn docs_of(&self, kind: PlantKind, quote: usize) -> impl Iterator<Item = &PlantedDoc> {
        self.documents
            .iter()
            .filter(move |d| d.kind == kind && d.quote == Some(quote))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoCorpus {
    pub documents: Vec<DocumentRecord>,
    pub truth: GroundTruth,
    /// Every generated word plus the function words, lowercased and sorted.
    pub vocabulary: Vec<String>,
}

const EN_FUNCTION: &[&str] = &[
    "the", "of", "and", "to", "in", "that", "is", "it", "for", "as", "with", "by", "this", "which",
    "are", "from",
];
const FR_FUNCTION: &[&str] = &[
    "le", "la", "les", "de", "des", "et", "est", "que", "qui", "dans", "pour", "une", "sur",
];
const AUTHORS: &[&str] = &[
    "Astell, Mary",
    "Berkeley, George",
    "Collier, Arthur",
    "Hume, David",
    "Hutcheson, Francis",
    "Law, Edmund",
    "Norris, John",
    "Reid, Thomas",
    "Shepherd, Mary",
    "Stillingfleet, Edward",
    "Watts, Isaac",
    "",
];
const GENRES: &[&str] = &[
    "Philosophy",
    "Religion",
    "Science",
    "Literature",
    "History",
    "Law",
    "",
];

struct WordFactory {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl WordFactory {
    const ONSETS: &'static [&'static str] = &[
        "b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "br", "st", "pl", "gr",
        "th",
    ];
    const NUCLEI: &'static [&'static str] = &["a", "e", "i", "o", "u", "ai", "ea", "ou"];
    const CODAS: &'static [&'static str] = &["", "", "n", "r", "s", "l", "nt", "st", "m"];

    fn syllable(&mut self) -> String {
        let o = Self::ONSETS.choose(&mut self.rng).unwrap();
        let n = Self::NUCLEI.choose(&mut self.rng).unwrap();
        let c = Self::CODAS.choose(&mut self.rng).unwrap();
        format!("{o}{n}{c}")
    }

    fn word(&mut self) -> String {
        loop {
            let k = self.rng.gen_range(2..=3);
            let w: String = (0..k).map(|_| self.syllable()).collect();
            if w.len() >= 5 && !EN_FUNCTION.contains(&w.as_str()) && self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn words(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.word()).collect()
    }

    /// A related form sharing the first two syllables' worth of characters.
    fn variant(&mut self, w: &str) -> String {
        let keep: String = w.chars().take(w.chars().count().max(4) - 2).collect();
        loop {
            let v = format!("{keep}{}", self.syllable());
            if v != w && self.used.insert(v.clone()) {
                return v;
            }
        }
    }
}

fn sentence_words(
    rng: &mut ChaCha8Rng,
    content: &[String],
    function: &[&str],
    n: usize,
) -> Vec<String> {
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.35) {
                (*function.choose(rng).unwrap()).to_owned()
            } else {
                content.choose(rng).unwrap().clone()
            }
        })
        .collect()
}

/// Joins words into sentences of 8 to 14 words.
fn prose(rng: &mut ChaCha8Rng, words: &[String]) -> String {
    let mut out = String::new();
    let mut left = 0;
    for (i, w) in words.iter().enumerate() {
        if left == 0 {
            if i > 0 {
                out.push_str(". ");
            }
            left = rng.gen_range(8..=14);
            let mut cs = w.chars();
            out.extend(cs.next().map(|c| c.to_ascii_uppercase()));
            out.push_str(cs.as_str());
        } else {
            out.push(' ');
            out.push_str(w);
        }
        left -= 1;
    }
    if !out.is_empty() {
        out.push('.');
    }
    out
}

/// Uniform random character substitution over letters, leaving whitespace
/// intact.
pub fn ocr_corrupt(rng: &mut ChaCha8Rng, text: &str, rate: f64) -> String {
    if rate <= 0.0 {
        return text.to_owned();
    }
    text.chars()
        .map(|c| {
            if !c.is_whitespace() && rng.gen_bool(rate) {
                let alt = (b'a' + rng.gen_range(0..26)) as char;
                if alt == c {
                    'e'
                } else {
                    alt
                }
            } else {
                c
            }
        })
        .collect()
}

/// True when the aligner would find reuse of `quote` in `text`.
fn has_lexical_match(quote: &PreparedQuery, text: &str) -> bool {
    !quote.align(text).is_empty()
}

fn adjacency(words: &[String]) -> HashSet<(String, String)> {
    words
        .windows(2)
        .map(|w| (w[0].to_lowercase(), w[1].to_lowercase()))
        .collect()
}

struct Builder {
    rng: ChaCha8Rng,
    words: WordFactory,
    general: Vec<String>,
    documents: Vec<DocumentRecord>,
    planted: Vec<PlantedDoc>,
    ocr_rate: f64,
}

impl Builder {
    fn push(
        &mut self,
        kind: PlantKind,
        quote: Option<usize>,
        work_id: String,
        text: String,
        language: &str,
    ) {
        let n = self.documents.len();
        let doc_id = format!("doc{n:05}");
        let text = if kind == PlantKind::Source {
            text
        } else {
            ocr_corrupt(&mut self.rng, &text, self.ocr_rate)
        };
        let year = if self.rng.gen_bool(0.95) {
            Some(self.rng.gen_range(1690..1800))
        } else {
            None
        };
        self.documents.push(DocumentRecord {
            doc_id: doc_id.clone(),
            work_id: work_id.clone(),
            title: format!("A Treatise {n}"),
            author: (*AUTHORS.choose(&mut self.rng).unwrap()).to_owned(),
            year,
            genre: (*GENRES.choose(&mut self.rng).unwrap()).to_owned(),
            declared_language: language.to_owned(),
            text,
        });
        self.planted.push(PlantedDoc {
            doc_id,
            work_id,
            kind,
            quote,
        });
    }

    fn filler(&mut self, n: usize) -> String {
        let words = sentence_words(&mut self.rng, &self.general.clone(), EN_FUNCTION, n);
        prose(&mut self.rng, &words)
    }
}

fn quote_text(rng: &mut ChaCha8Rng, topic: &[String]) -> String {
    loop {
        let n = rng.gen_range(26..=34);
        let words = sentence_words(rng, topic, EN_FUNCTION, n);
        let text = prose(rng, &words);
        if (190..=260).contains(&text.chars().count()) {
            return text;
        }
    }
}

/// Rewrites a quote: substitutes a share of its content words with related
/// forms and reorders words until no adjacent pair survives and the aligner
/// no longer sees reuse.
fn paraphrase(
    rng: &mut ChaCha8Rng,
    words: &mut WordFactory,
    quote: &str,
    topic: &[String],
    substitute: f64,
    aligner: &PreparedQuery,
) -> String {
    let original: Vec<String> = quote
        .split_whitespace()
        .map(|w| w.trim_matches('.').to_owned())
        .filter(|w| !w.is_empty())
        .collect();
    let forbidden = adjacency(&original);
    let topic_set: HashSet<&str> = topic.iter().map(String::as_str).collect();
    let mut out: Vec<String> = original
        .iter()
        .map(|w| {
            let lower = w.to_lowercase();
            if topic_set.contains(lower.as_str()) && rng.gen_bool(substitute) {
                words.variant(&lower)
            } else {
                lower
            }
        })
        .collect();
    for _ in 0..1000 {
        out.shuffle(rng);
        if adjacency(&out).is_disjoint(&forbidden) {
            let text = prose(rng, &out);
            if !has_lexical_match(aligner, &text) {
                return text;
            }
        }
    }
    prose(rng, &out)
}

pub fn make_demo_corpus(seed: u64, config: DemoConfig) -> Result<DemoCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words = WordFactory {
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5e_ed0f_face),
        used: HashSet::new(),
    };
    let general = words.words(400);
    let topics: Vec<Vec<String>> = (0..config.quotes).map(|_| words.words(18)).collect();
    let quotes: Vec<String> = topics.iter().map(|t| quote_text(&mut rng, t)).collect();

    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)),
        words,
        general,
        documents: Vec::new(),
        planted: Vec::new(),
        ocr_rate: config.ocr_rate,
    };

    // source: filler, quote, filler, quote, ..., filler
    let mut source = b.filler(40);
    let mut planted_quotes = Vec::new();
    for (i, q) in quotes.iter().enumerate() {
        source.push(' ');
        let start = source.chars().count();
        source.push_str(q);
        planted_quotes.push(PlantedQuote {
            index: i,
            source_span: Span::new(start, start + q.chars().count()),
            text: q.clone(),
        });
        source.push(' ');
        let filler = b.filler(40);
        source.push_str(&filler);
    }
    let source_work = "work-source".to_owned();
    b.push(PlantKind::Source, None, source_work.clone(), source, "en");

    let mut work_seq = 0usize;
    let mut next_work = || {
        work_seq += 1;
        format!("work{work_seq:04}")
    };

    for (i, q) in quotes.iter().enumerate() {
        let aligner = PreparedQuery::new(q, AlignParams::default());
        for _ in 0..config.copies_per_quote {
            let (nb, na) = (b.rng.gen_range(10..40), b.rng.gen_range(10..40));
            let before = b.filler(nb);
            let after = b.filler(na);
            b.push(
                PlantKind::Verbatim,
                Some(i),
                next_work(),
                format!("{before} {q} {after}"),
                "en",
            );
        }
        for p in 0..config.paraphrases_per_quote {
            // every other paraphrase is a looser rewrite
            let (kind, rate) = if p % 2 == 0 {
                (PlantKind::Paraphrase, 0.25)
            } else {
                (PlantKind::LooseParaphrase, 0.5)
            };
            let text = paraphrase(&mut b.rng, &mut b.words, q, &topics[i], rate, &aligner);
            let nt = b.rng.gen_range(5..15);
            let tail = b.filler(nt);
            b.push(kind, Some(i), next_work(), format!("{text} {tail}"), "en");
        }
        for _ in 0..config.topical_per_quote {
            let half: Vec<String> = topics[i][..topics[i].len() / 2].to_vec();
            let mut mixed = half.clone();
            mixed.extend(b.general.choose_multiple(&mut b.rng, 30).cloned());
            let ws = sentence_words(&mut b.rng, &mixed, EN_FUNCTION, 70);
            let text = prose(&mut b.rng, &ws);
            b.push(PlantKind::Topical, Some(i), next_work(), text, "en");
        }
    }

    let mut n = 0;
    while n < config.noise_docs {
        // some works survive in two editions
        let work = next_work();
        let editions = if b.rng.gen_bool(0.15) { 2 } else { 1 };
        let french = b.rng.gen_bool(0.1);
        for _ in 0..editions.min(config.noise_docs - n) {
            let len = b.rng.gen_range(60..260);
            let (function, lang) = if french {
                (FR_FUNCTION, "fr")
            } else {
                (EN_FUNCTION, "en")
            };
            let general = b.general.clone();
            let ws = sentence_words(&mut b.rng, &general, function, len);
            let text = prose(&mut b.rng, &ws);
            b.push(PlantKind::Noise, None, work.clone(), text, lang);
            n += 1;
        }
    }

    let mut vocabulary: Vec<String> = b
        .words
        .used
        .iter()
        .cloned()
        .chain(EN_FUNCTION.iter().chain(FR_FUNCTION).map(|s| s.to_string()))
        .collect();
    vocabulary.sort();
    vocabulary.dedup();

    Ok(DemoCorpus {
        documents: b.documents,
        truth: GroundTruth {
            source_doc: "doc00000".into(),
            source_work,
            quotes: planted_quotes,
            documents: b.planted,
        },
        vocabulary,
    })
}
