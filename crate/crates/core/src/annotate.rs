//! Committee labeling: per-annotator judgments reduced to a majority verdict.
//!
//! Judgments are the only persisted state (an append-only JSONL journal);
//! adjudications are derived from the current judgment per annotator.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{SentimentLabel, SurveyRecord};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub record_id: String,
    pub annotator_id: String,
    pub label: SentimentLabel,
    pub timestamp: DateTime<Utc>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Positive,
    Negative,
    Unresolved,
}

impl Verdict {
    pub fn label(self) -> Option<SentimentLabel> {
        match self {
            Verdict::Positive => Some(SentimentLabel::Positive),
            Verdict::Negative => Some(SentimentLabel::Negative),
            Verdict::Unresolved => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicatedLabel {
    pub record_id: String,
    pub label: Verdict,
    pub votes_positive: usize,
    pub votes_negative: usize,
}

impl AdjudicatedLabel {
    pub fn total_votes(&self) -> usize {
        self.votes_positive + self.votes_negative
    }
}

/// Strict majority over a set of votes; an exact tie is `Unresolved`.
pub fn majority(votes: impl IntoIterator<Item = SentimentLabel>) -> (Verdict, usize, usize) {
    let (mut pos, mut neg) = (0, 0);
    for v in votes {
        match v {
            SentimentLabel::Positive => pos += 1,
            SentimentLabel::Negative => neg += 1,
        }
    }
    let verdict = match pos.cmp(&neg) {
        std::cmp::Ordering::Greater => Verdict::Positive,
        std::cmp::Ordering::Less => Verdict::Negative,
        std::cmp::Ordering::Equal => Verdict::Unresolved,
    };
    (verdict, pos, neg)
}

/// What to do with a judgment from an annotator id not seen before.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AnnotatorPolicy {
    #[default]
    AutoRegister,
    Reject,
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("unknown record {0:?}")]
    UnknownRecord(String),
    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),
    #[error("record {0:?} has no judgments")]
    NoJudgments(String),
    #[error("duplicate record id {0:?} in corpus")]
    DuplicateRecord(String),
    #[error("journal line {line}: {message}")]
    Journal { line: usize, message: String },
    #[error("journal i/o: {0}")]
    Io(#[from] io::Error),
}

pub struct AnnotationStore {
    records: Vec<SurveyRecord>,
    index: HashMap<String, usize>,
    /// record id -> annotator id -> current judgment
    judgments: HashMap<String, BTreeMap<String, Judgment>>,
    annotators: BTreeSet<String>,
    policy: AnnotatorPolicy,
    journal: Option<BufWriter<File>>,
}

impl AnnotationStore {
    pub fn new(records: Vec<SurveyRecord>, policy: AnnotatorPolicy) -> Result<Self, AnnotateError> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.id.clone(), i).is_some() {
                return Err(AnnotateError::DuplicateRecord(r.id.clone()));
            }
        }
        Ok(Self {
            records,
            index,
            judgments: HashMap::new(),
            annotators: BTreeSet::new(),
            policy,
            journal: None,
        })
    }

    /// Replays an existing journal (if any) and appends new judgments to it.
    ///
    /// Annotators found in the journal are registered regardless of policy.
    pub fn with_journal(mut self, path: &Path) -> Result<Self, AnnotateError> {
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let j: Judgment = serde_json::from_str(&line).map_err(|e| AnnotateError::Journal {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                if !self.index.contains_key(&j.record_id) {
                    return Err(AnnotateError::Journal {
                        line: i + 1,
                        message: format!("judgment for unknown record {:?}", j.record_id),
                    });
                }
                self.annotators.insert(j.annotator_id.clone());
                self.apply(j);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.journal = Some(BufWriter::new(file));
        Ok(self)
    }

    pub fn register_annotator(&mut self, id: impl Into<String>) {
        self.annotators.insert(id.into());
    }

    pub fn annotators(&self) -> impl Iterator<Item = &str> {
        self.annotators.iter().map(String::as_str)
    }

    pub fn records(&self) -> &[SurveyRecord] {
        &self.records
    }

    pub fn record(&self, id: &str) -> Option<&SurveyRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    fn apply(&mut self, j: Judgment) {
        self.judgments
            .entry(j.record_id.clone())
            .or_default()
            .insert(j.annotator_id.clone(), j);
    }

    /// Stores a judgment, replacing any earlier one by the same annotator on
    /// the same record. The journal line is written before memory is updated.
    pub fn submit_judgment(&mut self, j: Judgment) -> Result<Judgment, AnnotateError> {
        if !self.index.contains_key(&j.record_id) {
            return Err(AnnotateError::UnknownRecord(j.record_id));
        }
        if !self.annotators.contains(&j.annotator_id) {
            match self.policy {
                AnnotatorPolicy::AutoRegister => {}
                AnnotatorPolicy::Reject => return Err(AnnotateError::UnknownAnnotator(j.annotator_id)),
            }
        }
        if let Some(w) = self.journal.as_mut() {
            serde_json::to_writer(&mut *w, &j).map_err(io::Error::from)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        self.annotators.insert(j.annotator_id.clone());
        self.apply(j.clone());
        Ok(j)
    }

    pub fn judgments_for(&self, record_id: &str) -> impl Iterator<Item = &Judgment> {
        self.judgments.get(record_id).into_iter().flat_map(|m| m.values())
    }

    pub fn judgment_count(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn adjudicate(&self, record_id: &str) -> Result<AdjudicatedLabel, AnnotateError> {
        if !self.index.contains_key(record_id) {
            return Err(AnnotateError::UnknownRecord(record_id.to_owned()));
        }
        let votes = self
            .judgments
            .get(record_id)
            .filter(|m| !m.is_empty())
            .ok_or_else(|| AnnotateError::NoJudgments(record_id.to_owned()))?;
        let (label, votes_positive, votes_negative) = majority(votes.values().map(|j| j.label));
        Ok(AdjudicatedLabel {
            record_id: record_id.to_owned(),
            label,
            votes_positive,
            votes_negative,
        })
    }

    /// Records this annotator has not judged yet, in corpus order.
    pub fn pending_for(&self, annotator_id: &str) -> Vec<&SurveyRecord> {
        self.records
            .iter()
            .filter(|r| {
                self.judgments
                    .get(&r.id)
                    .is_none_or(|m| !m.contains_key(annotator_id))
            })
            .collect()
    }

    /// Resolved records with at least `min_votes` votes, label set from the verdict.
    pub fn export_labeled(&self, min_votes: usize) -> Vec<SurveyRecord> {
        self.records
            .iter()
            .filter_map(|r| {
                let adj = self.adjudicate(&r.id).ok()?;
                let label = adj.label.label()?;
                (adj.total_votes() >= min_votes).then(|| SurveyRecord {
                    label: Some(label),
                    ..r.clone()
                })
            })
            .collect()
    }
}
