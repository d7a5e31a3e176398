//! Generated corpora whose label is decided by a sentiment keyword, for
//! exercising the pipeline without private data.

use crate::corpus::{SentimentLabel, SurveyRecord};
use crate::rng::{self, below};

pub const POSITIVE_WORDS: [&str; 5] = ["GOOD", "GREAT", "HAPPY", "HOPEFUL", "CALM"];
pub const NEGATIVE_WORDS: [&str; 5] = ["BAD", "SAD", "ANGRY", "WORRIED", "TIRED"];

const FILLER: [&str; 24] = [
    "I", "FEEL", "THE", "WEEK", "AT", "HOME", "WORK", "FAMILY", "LOCKDOWN", "IS", "VERY", "WITH", "MY", "DAYS", "ARE",
    "NEWS", "SCHOOL", "FRIENDS", "AND", "TIME", "LIFE", "THIS", "OF", "REALLY",
];

/// `per_class` records of each label, interleaved. Each text is 3 to 10
/// filler words with exactly one keyword from its label's list inserted at a
/// random position. Ids are `syn-0000`, `syn-0001`, ...
pub fn keyword_corpus(per_class: usize, seed: u64, positive: &[&str], negative: &[&str]) -> Vec<SurveyRecord> {
    assert!(!positive.is_empty() && !negative.is_empty(), "keyword lists must be non-empty");
    let mut source = rng::seeded(seed);
    let mut out = Vec::with_capacity(2 * per_class);
    for i in 0..2 * per_class {
        let label = if i % 2 == 0 { SentimentLabel::Positive } else { SentimentLabel::Negative };
        let words = match label {
            SentimentLabel::Positive => positive,
            SentimentLabel::Negative => negative,
        };
        let n_filler = 3 + below(&mut source, 8) as usize;
        let mut tokens: Vec<&str> = (0..n_filler)
            .map(|_| FILLER[below(&mut source, FILLER.len() as u64) as usize])
            .collect();
        let at = below(&mut source, n_filler as u64 + 1) as usize;
        tokens.insert(at, words[below(&mut source, words.len() as u64) as usize]);
        out.push(SurveyRecord::new(format!("syn-{i:04}"), tokens.join(" "), "en").with_label(label));
    }
    out
}

/// The default separable corpus: [`POSITIVE_WORDS`] vs [`NEGATIVE_WORDS`].
pub fn separable_corpus(per_class: usize, seed: u64) -> Vec<SurveyRecord> {
    keyword_corpus(per_class, seed, &POSITIVE_WORDS, &NEGATIVE_WORDS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_and_keyword_determined() {
        let c = separable_corpus(50, 3);
        assert_eq!(c.len(), 100);
        assert_eq!(c.iter().filter(|r| r.label == Some(SentimentLabel::Positive)).count(), 50);
        for r in &c {
            let has_pos = r.text.split(' ').any(|w| POSITIVE_WORDS.contains(&w));
            let has_neg = r.text.split(' ').any(|w| NEGATIVE_WORDS.contains(&w));
            assert_eq!(has_pos, r.label == Some(SentimentLabel::Positive));
            assert_ne!(has_pos, has_neg);
        }
        assert_eq!(c, separable_corpus(50, 3));
        assert_ne!(c, separable_corpus(50, 4));
    }

    #[test]
    fn texts_are_uppercase() {
        assert!(separable_corpus(10, 1).iter().all(|r| r.text == r.text.to_uppercase()));
    }
}
