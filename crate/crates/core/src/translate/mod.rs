//! Batch translation of survey responses through a pluggable backend, with a
//! persistent memo so reruns only pay for texts not yet translated.

mod backend;
mod cache;

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

pub use backend::{BackendError, DictionaryBackend, IdentityBackend, TranslationBackend};
pub use cache::{CacheEntry, TranslationCache};

use crate::corpus::{RecordFlag, SurveyRecord};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranslateOptions {
    pub source_lang: String,
    pub target_lang: String,
    pub batch_size: usize,
    /// Maximum number of batches in flight at once.
    pub parallelism: usize,
}

impl Default for TranslateOptions {
    fn default() -> Self {
        Self {
            source_lang: "fa".into(),
            target_lang: "en".into(),
            batch_size: 64,
            parallelism: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("invalid translation request: {0}")]
    InvalidRequest(String),
    #[error("backend failed on batch containing records {ids:?}: {message}")]
    Backend { ids: Vec<String>, message: String },
    #[error("translation cache: {0}")]
    Cache(#[from] std::io::Error),
}

/// Replaces each record's text with its translation.
///
/// Records already flagged `Translated` pass through untouched. The cache is
/// consulted before the backend, and only misses are sent, deduplicated and
/// chunked into batches of at most `batch_size`. A failed batch aborts the
/// call, but batches that succeeded stay in the cache.
pub fn translate_corpus<B: TranslationBackend>(
    records: Vec<SurveyRecord>,
    backend: &B,
    cache: &TranslationCache,
    opts: &TranslateOptions,
) -> Result<Vec<SurveyRecord>, TranslateError> {
    if opts.batch_size == 0 {
        return Err(TranslateError::InvalidRequest("batch_size must be at least 1".into()));
    }
    let mut seen = HashSet::new();
    for r in &records {
        if !seen.insert(r.id.as_str()) {
            return Err(TranslateError::InvalidRequest(format!("duplicate record id {:?}", r.id)));
        }
        if !r.has_flag(RecordFlag::Translated) && r.text.trim().is_empty() {
            return Err(TranslateError::InvalidRequest(format!("record {:?} has empty text", r.id)));
        }
    }

    let (from, to) = (opts.source_lang.as_str(), opts.target_lang.as_str());
    let pending = records.iter().filter(|r| !r.has_flag(RecordFlag::Translated));

    let mut misses: Vec<String> = Vec::new();
    let mut miss_set = HashSet::new();
    for r in pending.clone() {
        if cache.get(&r.text, from, to).is_none() && miss_set.insert(r.text.as_str()) {
            misses.push(r.text.clone());
        }
    }

    let batches: Vec<&[String]> = misses.chunks(opts.batch_size).collect();
    let translated = run_batches(&batches, backend, cache, opts).map_err(|(batch, message)| {
        let texts: HashSet<&str> = batches[batch].iter().map(String::as_str).collect();
        let ids = pending
            .clone()
            .filter(|r| texts.contains(r.text.as_str()))
            .map(|r| r.id.clone())
            .collect();
        TranslateError::Backend { ids, message }
    })?;

    records
        .into_iter()
        .map(|mut r| {
            if r.has_flag(RecordFlag::Translated) {
                return Ok(r);
            }
            let out = match translated.get(&r.text) {
                Some(t) => t.clone(),
                None => cache.get(&r.text, from, to).ok_or_else(|| {
                    TranslateError::InvalidRequest(format!("no translation produced for record {:?}", r.id))
                })?,
            };
            r.text = out;
            r.language = opts.target_lang.clone();
            r.flags.insert(RecordFlag::Translated);
            Ok(r)
        })
        .collect()
}

/// Runs every batch, at most `parallelism` at a time. Returns fresh translations,
/// or the index of the lowest failed batch with its message.
fn run_batches<B: TranslationBackend>(
    batches: &[&[String]],
    backend: &B,
    cache: &TranslationCache,
    opts: &TranslateOptions,
) -> Result<HashMap<String, String>, (usize, String)> {
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let results: Mutex<Vec<Option<Result<Vec<String>, String>>>> = Mutex::new(vec![None; batches.len()]);
    let (from, to) = (opts.source_lang.as_str(), opts.target_lang.as_str());

    let worker = || loop {
        if failed.load(Ordering::SeqCst) {
            break;
        }
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(batch) = batches.get(i) else { break };
        let outcome = backend
            .translate_batch(batch, from, to)
            .map_err(|e| e.0)
            .and_then(|out| {
                if out.len() == batch.len() {
                    Ok(out)
                } else {
                    Err(format!("backend returned {} texts for a batch of {}", out.len(), batch.len()))
                }
            })
            .and_then(|out| {
                let entries = batch.iter().zip(&out).map(|(src, o)| CacheEntry {
                    src: src.clone(),
                    from: from.to_owned(),
                    to: to.to_owned(),
                    out: o.clone(),
                });
                cache.insert_many(entries).map_err(|e| e.to_string())?;
                Ok(out)
            });
        if outcome.is_err() {
            failed.store(true, Ordering::SeqCst);
        }
        results.lock().expect("results lock poisoned")[i] = Some(outcome);
    };

    let workers = opts.parallelism.clamp(1, batches.len().max(1));
    if workers == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(worker);
            }
        });
    }

    let mut out = HashMap::new();
    for (i, res) in results.into_inner().expect("results lock poisoned").into_iter().enumerate() {
        match res {
            Some(Ok(texts)) => out.extend(batches[i].iter().cloned().zip(texts)),
            Some(Err(message)) => return Err((i, message)),
            None => {}
        }
    }
    Ok(out)
}
