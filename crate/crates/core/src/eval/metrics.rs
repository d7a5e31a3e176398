use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SentimentLabel;

/// Binary confusion counts relative to a reference class: a "positive" in
/// TP/FP/FN/TN means "predicted or truly the reference class".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    #[serde(rename = "tp")]
    pub true_pos: u64,
    #[serde(rename = "fp")]
    pub false_pos: u64,
    #[serde(rename = "fn")]
    pub false_neg: u64,
    #[serde(rename = "tn")]
    pub true_neg: u64,
}

impl ConfusionMatrix {
    pub fn new(true_pos: u64, false_pos: u64, false_neg: u64, true_neg: u64) -> Self {
        Self {
            true_pos,
            false_pos,
            false_neg,
            true_neg,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    /// The same predictions seen from the other reference class.
    pub fn swap(&self) -> Self {
        Self::new(self.true_neg, self.false_neg, self.false_pos, self.true_pos)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{predictions} predictions but {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
}

pub fn confusion(
    predictions: &[SentimentLabel],
    truths: &[SentimentLabel],
    reference: SentimentLabel,
) -> Result<ConfusionMatrix, MetricsError> {
    if predictions.len() != truths.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truths) {
        match (t == reference, p == reference) {
            (true, true) => cm.true_pos += 1,
            (false, true) => cm.false_pos += 1,
            (true, false) => cm.false_neg += 1,
            (false, false) => cm.true_neg += 1,
        }
    }
    Ok(cm)
}

/// Accuracy, precision, recall and F1 for one reference class. `None` marks a
/// metric whose denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics<T> {
    pub accuracy: Option<T>,
    pub precision: Option<T>,
    pub recall: Option<T>,
    pub f1: Option<T>,
}

fn ratio<T: Float>(num: u64, den: u64) -> Option<T> {
    (den > 0).then(|| T::from(num).expect("count fits") / T::from(den).expect("count fits"))
}

/// ```text
/// accuracy  = (TP + TN) / (TP + TN + FP + FN)
/// precision = TP / (TP + FP)
/// recall    = TP / (TP + FN)
/// F1        = 2·precision·recall / (precision + recall)
/// ```
pub fn class_metrics<T: Float>(cm: &ConfusionMatrix) -> ClassMetrics<T> {
    let precision = ratio(cm.true_pos, cm.true_pos + cm.false_pos);
    let recall = ratio(cm.true_pos, cm.true_pos + cm.false_neg);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > T::zero() => Some((p + p) * r / (p + r)),
        _ => None,
    };
    ClassMetrics {
        accuracy: ratio(cm.true_pos + cm.true_neg, cm.total()),
        precision,
        recall,
        f1,
    }
}

/// Per-metric arithmetic mean; undefined if either side is.
pub fn macro_average<T: Float>(a: &ClassMetrics<T>, b: &ClassMetrics<T>) -> ClassMetrics<T> {
    let two = T::one() + T::one();
    let mean = |x: Option<T>, y: Option<T>| Some((x? + y?) / two);
    ClassMetrics {
        accuracy: mean(a.accuracy, b.accuracy),
        precision: mean(a.precision, b.precision),
        recall: mean(a.recall, b.recall),
        f1: mean(a.f1, b.f1),
    }
}

/// Rounds half away from zero to three decimals.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}
