//! Survey records, cleaning rules, and train/test splitting.

mod io;
mod split;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use io::{ingest, read_records, write_records, Format, IngestError};
pub use split::{split, SplitError, SplitKind, SplitPlan, DEFAULT_INNER_TRAIN_FRACTION};

/// Binary sentiment class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Negative,
    Positive,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 2] = [SentimentLabel::Negative, SentimentLabel::Positive];

    /// Classifier output index: Negative is 0, Positive is 1.
    pub fn index(self) -> usize {
        match self {
            SentimentLabel::Negative => 0,
            SentimentLabel::Positive => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(SentimentLabel::Negative),
            1 => Some(SentimentLabel::Positive),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            SentimentLabel::Negative => SentimentLabel::Positive,
            SentimentLabel::Positive => SentimentLabel::Negative,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentLabel::Negative => "negative",
            SentimentLabel::Positive => "positive",
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(SentimentLabel::Positive),
            "negative" => Ok(SentimentLabel::Negative),
            other => Err(format!("unknown sentiment label {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFlag {
    /// Annotators judged the answer to carry no clear idea.
    Unclear,
    /// Text has already been through translation.
    Translated,
}

impl FromStr for RecordFlag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unclear" => Ok(RecordFlag::Unclear),
            "translated" => Ok(RecordFlag::Translated),
            other => Err(format!("unknown record flag {other:?}")),
        }
    }
}

impl RecordFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordFlag::Unclear => "unclear",
            RecordFlag::Translated => "translated",
        }
    }
}

/// One open-text survey response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub id: String,
    #[serde(default, deserialize_with = "null_as_empty")]
    pub text: String,
    #[serde(default)]
    pub language: String,
    #[serde(default)]
    pub label: Option<SentimentLabel>,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub flags: BTreeSet<RecordFlag>,
}

fn null_as_empty<'de, D: serde::Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    Ok(Option::<String>::deserialize(d)?.unwrap_or_default())
}

impl SurveyRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, language: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            language: language.into(),
            label: None,
            source: String::new(),
            flags: BTreeSet::new(),
        }
    }

    pub fn with_label(mut self, label: SentimentLabel) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_flag(mut self, flag: RecordFlag) -> Self {
        self.flags.insert(flag);
        self
    }

    pub fn has_flag(&self, flag: RecordFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// Case folding applied by [`clean`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseFold {
    #[default]
    Upper,
    Lower,
    None,
}

impl CaseFold {
    pub fn apply(self, text: &str) -> String {
        match self {
            CaseFold::Upper => text.to_uppercase(),
            CaseFold::Lower => text.to_lowercase(),
            CaseFold::None => text.to_owned(),
        }
    }
}

impl FromStr for CaseFold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "upper" => Ok(CaseFold::Upper),
            "lower" => Ok(CaseFold::Lower),
            "none" => Ok(CaseFold::None),
            other => Err(format!("unknown case fold {other:?}")),
        }
    }
}

/// Drops blank and unclear answers and case-folds the survivors, preserving order.
pub fn clean(records: Vec<SurveyRecord>, case_fold: CaseFold) -> Vec<SurveyRecord> {
    records
        .into_iter()
        .filter(|r| !r.text.trim().is_empty() && !r.has_flag(RecordFlag::Unclear))
        .map(|mut r| {
            r.text = case_fold.apply(&r.text);
            r
        })
        .collect()
}
