use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EncoderError;

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const CLS: TokenId = 2;

const RESERVED: [&str; 3] = ["[PAD]", "[UNK]", "[CLS]"];

/// Dense token table. Ids `0..3` are `[PAD]`, `[UNK]`, `[CLS]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = String;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(format!("vocabulary must start with {RESERVED:?}"));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as TokenId).is_some() {
                return Err(format!("duplicate token {t:?}"));
            }
        }
        Ok(Self { tokens, index })
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, text: &str, max_len: usize) -> Vec<TokenId> {
        encode_text(text, self, max_len)
    }
}

/// Whitespace tokens kept when they occur at least `min_count` times, ordered
/// by descending frequency then lexicographically.
///
/// Texts are expected to be case-folded already; no further normalization happens.
pub fn build_vocab<S: AsRef<str>>(corpus: &[S], min_count: usize) -> Result<Vocabulary, EncoderError> {
    if corpus.is_empty() {
        return Err(EncoderError::EmptyCorpus);
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for text in corpus {
        for tok in text.as_ref().split_whitespace() {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(t, c)| c >= min_count.max(1) && !RESERVED.contains(&t))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens = RESERVED
        .iter()
        .map(|s| s.to_string())
        .chain(kept.into_iter().map(|(t, _)| t.to_owned()))
        .collect::<Vec<_>>();
    Ok(Vocabulary::try_from(tokens).expect("reserved prefix and unique tokens by construction"))
}

/// `[CLS]` followed by token ids, truncated and `[PAD]`-filled to exactly `max_len`.
pub fn encode_text(text: &str, vocab: &Vocabulary, max_len: usize) -> Vec<TokenId> {
    let mut ids: Vec<TokenId> = std::iter::once(CLS)
        .chain(text.split_whitespace().map(|t| vocab.id(t)))
        .take(max_len)
        .collect();
    ids.resize(max_len, PAD);
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frequency_ordering() {
        let v = build_vocab(&["good good bad"], 1).unwrap();
        assert_eq!(v.tokens(), ["[PAD]", "[UNK]", "[CLS]", "good", "bad"]);
        assert!(v.id("good") < v.id("bad"));
    }

    #[test]
    fn min_count_threshold() {
        let v = build_vocab(&["good good bad"], 2).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v.id("bad"), UNK);
    }

    #[test]
    fn ties_break_lexicographically_and_deterministically() {
        let corpus = ["b a c", "c a b"];
        let v1 = build_vocab(&corpus, 1).unwrap();
        let v2 = build_vocab(&corpus, 1).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(&v1.tokens()[3..], ["a", "b", "c"]);
    }

    #[test]
    fn empty_corpus_is_error() {
        let empty: [&str; 0] = [];
        assert!(matches!(build_vocab(&empty, 1), Err(EncoderError::EmptyCorpus)));
    }

    #[test]
    fn encode_pads_and_truncates() {
        let v = build_vocab(&["good good bad"], 1).unwrap();
        let good = v.id("good");
        assert_eq!(encode_text("good", &v, 4), vec![CLS, good, PAD, PAD]);
        assert_eq!(encode_text("good zebra", &v, 4), vec![CLS, good, UNK, PAD]);
        assert_eq!(encode_text("good bad good bad good", &v, 3), vec![CLS, good, v.id("bad")]);
        assert_eq!(encode_text("", &v, 2), vec![CLS, PAD]);
    }

    #[test]
    fn serde_as_token_list() {
        let v = build_vocab(&["x y y"], 1).unwrap();
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["[PAD]","[UNK]","[CLS]","y","x"]"#);
        assert_eq!(serde_json::from_str::<Vocabulary>(&json).unwrap(), v);
        assert!(serde_json::from_str::<Vocabulary>(r#"["a","b"]"#).is_err());
    }
}
