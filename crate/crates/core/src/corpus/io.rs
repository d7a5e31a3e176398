use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{RecordFlag, SentimentLabel, SurveyRecord};

/// On-disk corpus encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    /// Header `id,text,language,label,source,flags`, RFC 4180 quoting,
    /// flags separated by `;`.
    Csv,
    /// One JSON record per line.
    Jsonl,
}

impl FromStr for Format {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "ndjson" => Ok(Format::Jsonl),
            other => Err(IngestError::UnknownFormat(other.to_owned())),
        }
    }
}

impl Format {
    /// Guesses from a file extension.
    pub fn from_path(path: &Path) -> Option<Format> {
        path.extension()?.to_str()?.parse().ok()
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unknown corpus format {0:?} (expected csv or jsonl)")]
    UnknownFormat(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("writing records: {0}")]
    Write(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    id: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    language: String,
    #[serde(default)]
    label: String,
    #[serde(default)]
    source: String,
    #[serde(default)]
    flags: String,
}

impl CsvRow {
    fn into_record(self) -> Result<SurveyRecord, String> {
        let label = match self.label.trim() {
            "" | "null" => None,
            other => Some(other.parse::<SentimentLabel>()?),
        };
        let flags = self
            .flags
            .split(';')
            .filter(|f| !f.trim().is_empty())
            .map(RecordFlag::from_str)
            .collect::<Result<_, _>>()?;
        Ok(SurveyRecord {
            id: self.id,
            text: self.text,
            language: self.language,
            label,
            source: self.source,
            flags,
        })
    }

    fn from_record(r: &SurveyRecord) -> Self {
        CsvRow {
            id: r.id.clone(),
            text: r.text.clone(),
            language: r.language.clone(),
            label: r.label.map(|l| l.as_str().to_owned()).unwrap_or_default(),
            source: r.source.clone(),
            flags: r
                .flags
                .iter()
                .map(|f| f.as_str())
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

/// Reads every record from `path`.
pub fn ingest(path: &Path, format: Format) -> Result<Vec<SurveyRecord>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_records(BufReader::new(file), format).map_err(|e| match e {
        IngestError::Io { source, .. } => IngestError::Io {
            path: path.to_owned(),
            source,
        },
        other => other,
    })
}

pub fn read_records<R: Read>(reader: R, format: Format) -> Result<Vec<SurveyRecord>, IngestError> {
    match format {
        Format::Jsonl => read_jsonl(reader),
        Format::Csv => read_csv(reader),
    }
}

fn read_jsonl<R: Read>(reader: R) -> Result<Vec<SurveyRecord>, IngestError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|source| IngestError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| IngestError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

fn read_csv<R: Read>(reader: R) -> Result<Vec<SurveyRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let malformed = |line: u64, e: &dyn std::fmt::Display| IngestError::Malformed {
        line,
        message: e.to_string(),
    };
    let headers = rdr.headers().map_err(|e| malformed(1, &e))?.clone();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| malformed(e.position().map_or(0, |p| p.line()), &e))?;
        let line = row.position().map_or(0, |p| p.line());
        let parsed: CsvRow = row.deserialize(Some(&headers)).map_err(|e| malformed(line, &e))?;
        out.push(parsed.into_record().map_err(|message| IngestError::Malformed { line, message })?);
    }
    Ok(out)
}

/// Writes records in the given format; JSONL output is one object per line.
pub fn write_records<W: Write>(writer: W, records: &[SurveyRecord], format: Format) -> Result<(), IngestError> {
    let err = |e: &dyn std::fmt::Display| IngestError::Write(e.to_string());
    match format {
        Format::Jsonl => {
            let mut w = io::BufWriter::new(writer);
            for r in records {
                serde_json::to_writer(&mut w, r).map_err(|e| err(&e))?;
                w.write_all(b"\n").map_err(|e| err(&e))?;
            }
            w.flush().map_err(|e| err(&e))
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            for r in records {
                w.serialize(CsvRow::from_record(r)).map_err(|e| err(&e))?;
            }
            w.flush().map_err(|e| err(&e))
        }
    }
}
