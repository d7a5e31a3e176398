use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct BackendError(pub String);

/// A batch translation service.
///
/// Implementations must return exactly one output per input, in input order.
pub trait TranslationBackend: Send + Sync {
    fn translate_batch(&self, texts: &[String], source_lang: &str, target_lang: &str) -> Result<Vec<String>, BackendError>;
}

impl<B: TranslationBackend + ?Sized> TranslationBackend for &B {
    fn translate_batch(&self, texts: &[String], source_lang: &str, target_lang: &str) -> Result<Vec<String>, BackendError> {
        (**self).translate_batch(texts, source_lang, target_lang)
    }
}

impl<B: TranslationBackend + ?Sized> TranslationBackend for Box<B> {
    fn translate_batch(&self, texts: &[String], source_lang: &str, target_lang: &str) -> Result<Vec<String>, BackendError> {
        (**self).translate_batch(texts, source_lang, target_lang)
    }
}

/// Returns its input unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityBackend;

impl TranslationBackend for IdentityBackend {
    fn translate_batch(&self, texts: &[String], _: &str, _: &str) -> Result<Vec<String>, BackendError> {
        Ok(texts.to_vec())
    }
}

/// Lookup-table translator for offline runs and tests.
///
/// A text found verbatim in the table is replaced whole; otherwise each
/// whitespace-delimited word is looked up and unknown words pass through.
#[derive(Clone, Debug, Default)]
pub struct DictionaryBackend {
    entries: HashMap<String, String>,
}

impl DictionaryBackend {
    pub fn new(entries: HashMap<String, String>) -> Self {
        Self { entries }
    }

    /// Loads a JSON object of `{"source": "target", ...}`.
    pub fn from_json_file(path: &Path) -> Result<Self, BackendError> {
        let raw = fs::read_to_string(path).map_err(|e| BackendError(format!("{}: {e}", path.display())))?;
        let entries = serde_json::from_str(&raw).map_err(|e| BackendError(format!("{}: {e}", path.display())))?;
        Ok(Self { entries })
    }

    fn translate_one(&self, text: &str) -> String {
        if let Some(hit) = self.entries.get(text) {
            return hit.clone();
        }
        text.split_whitespace()
            .map(|w| self.entries.get(w).map_or(w, String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl TranslationBackend for DictionaryBackend {
    fn translate_batch(&self, texts: &[String], _: &str, _: &str) -> Result<Vec<String>, BackendError> {
        Ok(texts.iter().map(|t| self.translate_one(t)).collect())
    }
}
