use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Expert judgement of how a hit relates to its query quote.
///
/// Verbatim reuse has no variant: those hits are removed by the lexical
/// baseline before annotation. The name `LexicalMatch` is reserved and
/// rejected on input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Label {
    Paraphrase,
    MeaningMatch,
    TopicalMatch,
    NoMatch,
    DontKnow,
}

pub const RESERVED_LABEL: &str = "LexicalMatch";

impl Label {
    pub const ALL: [Label; 5] = [
        Label::Paraphrase,
        Label::MeaningMatch,
        Label::TopicalMatch,
        Label::NoMatch,
        Label::DontKnow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Paraphrase => "Paraphrase",
            Label::MeaningMatch => "MeaningMatch",
            Label::TopicalMatch => "TopicalMatch",
            Label::NoMatch => "NoMatch",
            Label::DontKnow => "DontKnow",
        }
    }

    /// Human-readable name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Label::Paraphrase => "Paraphrase",
            Label::MeaningMatch => "Meaning Match",
            Label::TopicalMatch => "Topical Match",
            Label::NoMatch => "No Match",
            Label::DontKnow => "Don't Know",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Paraphrases and meaning matches count as genuine reception.
pub fn is_significant(label: Label) -> bool {
    matches!(label, Label::Paraphrase | Label::MeaningMatch)
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    /// Accepts the canonical names as well as spaced or lowercase spellings
    /// ("Meaning Match", "dont_know", "Don't Know").
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        match key.as_str() {
            "paraphrase" | "paraphrasematch" => Ok(Label::Paraphrase),
            "meaningmatch" => Ok(Label::MeaningMatch),
            "topicalmatch" => Ok(Label::TopicalMatch),
            "nomatch" => Ok(Label::NoMatch),
            "dontknow" => Ok(Label::DontKnow),
            "lexicalmatch" => Err(Error::InvalidLabel(format!(
                "{s} ({RESERVED_LABEL} is reserved; lexical hits are filtered before annotation)"
            ))),
            _ => Err(Error::InvalidLabel(s.to_owned())),
        }
    }
}

impl TryFrom<String> for Label {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Label> for String {
    fn from(l: Label) -> String {
        l.as_str().to_owned()
    }
}
