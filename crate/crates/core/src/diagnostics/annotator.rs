//! Linguistic annotation: tokens, lemmas and universal part-of-speech tags.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;
use crate::{Error, Result};

/// The twelve coarse universal part-of-speech categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PosTag {
    Adj,
    Adp,
    Adv,
    Conj,
    Det,
    Noun,
    Num,
    Prt,
    Pron,
    Verb,
    Punct,
    X,
}

impl PosTag {
    pub const ALL: [PosTag; 12] = [
        PosTag::Adj,
        PosTag::Adp,
        PosTag::Adv,
        PosTag::Conj,
        PosTag::Det,
        PosTag::Noun,
        PosTag::Num,
        PosTag::Prt,
        PosTag::Pron,
        PosTag::Verb,
        PosTag::Punct,
        PosTag::X,
    ];

    pub fn index(self) -> usize {
        PosTag::ALL
            .iter()
            .position(|&t| t == self)
            .expect("tag in ALL")
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Adj => "ADJ",
            PosTag::Adp => "ADP",
            PosTag::Adv => "ADV",
            PosTag::Conj => "CONJ",
            PosTag::Det => "DET",
            PosTag::Noun => "NOUN",
            PosTag::Num => "NUM",
            PosTag::Prt => "PRT",
            PosTag::Pron => "PRON",
            PosTag::Verb => "VERB",
            PosTag::Punct => ".",
            PosTag::X => "X",
        }
    }

    pub fn parse(s: &str) -> Option<PosTag> {
        PosTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .or(match s {
                "PUNCT" => Some(PosTag::Punct),
                _ => None,
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedToken {
    pub text: String,
    pub lemma: String,
    pub tag: PosTag,
}

impl AnnotatedToken {
    /// Word tokens contain at least one alphanumeric character.
    pub fn is_word(&self) -> bool {
        self.text.chars().any(char::is_alphanumeric)
    }

    pub fn is_alphabetic(&self) -> bool {
        !self.text.is_empty() && self.text.chars().all(char::is_alphabetic)
    }
}

/// Anything that can split a text into lemmatized, tagged tokens.
pub trait LinguisticAnnotator: Sync {
    fn annotate(&self, text: &str) -> Vec<AnnotatedToken>;
}

/// Word-to-tag table. Lines are `word<TAB>TAG`; blank lines and lines
/// starting with `#` are ignored; the first entry for a word wins.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    tags: HashMap<String, PosTag>,
}

pub const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon_en.txt");

impl Lexicon {
    pub fn parse(source: &str) -> Result<Self> {
        let mut tags = HashMap::new();
        for (i, raw) in source.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(word), Some(tag), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::MalformedLine {
                    line: i + 1,
                    message: "expected `word<TAB>TAG`".into(),
                });
            };
            let tag = PosTag::parse(tag).ok_or_else(|| Error::MalformedLine {
                line: i + 1,
                message: format!("unknown tag {tag:?}"),
            })?;
            tags.entry(word.to_lowercase()).or_insert(tag);
        }
        Ok(Self { tags })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("shipped lexicon parses")
    }

    pub fn get(&self, word: &str) -> Option<PosTag> {
        self.tags.get(word).copied()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tags.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// Suffix-stripping lemmatizer for lowercased English words.
pub fn lemmatize(word: &str) -> String {
    let w = word.to_lowercase();
    let n = w.chars().count();
    let strip = |k: usize| w[..w.len() - k].to_owned();
    if n > 4 && w.ends_with("ies") {
        return format!("{}y", strip(3));
    }
    if n > 4
        && ["sses", "shes", "ches", "xes", "zes"]
            .iter()
            .any(|s| w.ends_with(s))
    {
        return strip(2);
    }
    if n > 3 && w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") && !w.ends_with("is") {
        return strip(1);
    }
    if n > 5 && w.ends_with("ing") {
        return undouble(strip(3));
    }
    if n > 4 && w.ends_with("ed") && !w.ends_with("eed") {
        return undouble(strip(2));
    }
    w
}

/// "stopp" -> "stop", but "fall" and "pass" keep their doubled letters.
fn undouble(stem: String) -> String {
    let chars: Vec<char> = stem.chars().collect();
    match chars.as_slice() {
        [.., a, b]
            if a == b && !matches!(a, 'l' | 's' | 'z' | 'f' | 'e' | 'o') && chars.len() > 3 =>
        {
            chars[..chars.len() - 1].iter().collect()
        }
        _ => stem,
    }
}

/// Rule baseline: the corpus tokenizer, [`lemmatize`], and a lexicon lookup
/// with suffix heuristics for unknown words.
#[derive(Debug, Clone)]
pub struct RuleAnnotator {
    lexicon: Lexicon,
}

impl RuleAnnotator {
    pub fn new(lexicon: Lexicon) -> Self {
        Self { lexicon }
    }

    pub fn tag(&self, token: &str) -> PosTag {
        if !token.chars().any(char::is_alphanumeric) {
            return PosTag::Punct;
        }
        let lower = token.to_lowercase();
        if let Some(t) = self.lexicon.get(&lower) {
            return t;
        }
        if lower
            .chars()
            .all(|c| c.is_ascii_digit() || c == ',' || c == '.')
        {
            return PosTag::Num;
        }
        if let Some(t) = self.lexicon.get(&lemmatize(&lower)) {
            // plural nouns and inflected verbs keep their lemma's class
            return t;
        }
        if !lower.chars().all(char::is_alphabetic) {
            return PosTag::X;
        }
        const RULES: &[(&str, PosTag)] = &[
            ("ly", PosTag::Adv),
            ("ing", PosTag::Verb),
            ("ed", PosTag::Verb),
            ("ize", PosTag::Verb),
            ("ise", PosTag::Verb),
            ("ous", PosTag::Adj),
            ("ful", PosTag::Adj),
            ("able", PosTag::Adj),
            ("ible", PosTag::Adj),
            ("ive", PosTag::Adj),
            ("al", PosTag::Adj),
            ("ic", PosTag::Adj),
        ];
        RULES
            .iter()
            .find(|(suffix, _)| lower.len() > suffix.len() + 2 && lower.ends_with(suffix))
            .map_or(PosTag::Noun, |&(_, t)| t)
    }
}

impl Default for RuleAnnotator {
    fn default() -> Self {
        Self::new(Lexicon::builtin())
    }
}

impl LinguisticAnnotator for RuleAnnotator {
    fn annotate(&self, text: &str) -> Vec<AnnotatedToken> {
        tokenize(text)
            .into_iter()
            .map(|t| AnnotatedToken {
                lemma: lemmatize(&t),
                tag: self.tag(&t),
                text: t,
            })
            .collect()
    }
}
