//! Translation over HTTP with a Google-Translate-v2-shaped request:
//!
//! ```text
//! POST <endpoint>?key=<api key>
//! {"q": [texts...], "source": "fa", "target": "en", "format": "text"}
//! → {"data": {"translations": [{"translatedText": "..."}, ...]}}
//! ```

use std::time::Duration;

use serde::{Deserialize, Serialize};

use sentiment_core::translate::{BackendError, TranslationBackend};

pub const ENDPOINT_VAR: &str = "SENTIMENT_TRANSLATE_ENDPOINT";
pub const API_KEY_VAR: &str = "SENTIMENT_TRANSLATE_API_KEY";

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: reqwest::Url,
}

#[derive(Serialize)]
struct Request<'a> {
    q: &'a [String],
    source: &'a str,
    target: &'a str,
    format: &'static str,
}

#[derive(Deserialize)]
struct Response {
    data: Data,
}

#[derive(Deserialize)]
struct Data {
    translations: Vec<Translation>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Translation {
    translated_text: String,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| BackendError(e.to_string()))?;
        let endpoint = endpoint.into();
        let mut url = reqwest::Url::parse(&endpoint).map_err(|e| BackendError(format!("endpoint {endpoint:?}: {e}")))?;
        if let Some(key) = api_key {
            url.query_pairs_mut().append_pair("key", &key);
        }
        Ok(Self { client, url })
    }

    /// Reads the endpoint (required) and API key (optional) from the environment.
    pub fn from_env() -> Result<Self, String> {
        let endpoint = std::env::var(ENDPOINT_VAR).map_err(|_| format!("--backend http needs {ENDPOINT_VAR} to be set"))?;
        let key = std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty());
        Self::new(endpoint, key).map_err(|e| e.0)
    }
}

impl TranslationBackend for HttpBackend {
    fn translate_batch(&self, texts: &[String], source_lang: &str, target_lang: &str) -> Result<Vec<String>, BackendError> {
        let resp = self
            .client
            .post(self.url.clone())
            .json(&Request {
                q: texts,
                source: source_lang,
                target: target_lang,
                format: "text",
            })
            .send().map_err(|e| BackendError(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(BackendError(format!("HTTP {status}: {}", body.trim())));
        }
        let parsed: Response = resp.json().map_err(|e| BackendError(format!("bad response body: {e}")))?;
        let out: Vec<String> = parsed.data.translations.into_iter().map(|t| t.translated_text).collect();
        if out.len() != texts.len() {
            return Err(BackendError(format!("sent {} texts, got {} translations", texts.len(), out.len())));
        }
        Ok(out)
    }
}
