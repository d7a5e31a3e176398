use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{SentimentLabel, SurveyRecord};
use crate::rng;

/// Inner train share used by balanced plans once the equal-class pool is drawn.
pub const DEFAULT_INNER_TRAIN_FRACTION: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SplitKind {
    /// Shuffle everything, keep `round(train_fraction · N)` for training.
    Fractional { train_fraction: f64 },
    /// Draw exactly `per_class_count` records of each class, then split the
    /// pool fractionally by `train_fraction`.
    Balanced {
        per_class_count: usize,
        train_fraction: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub seed: u64,
}

impl SplitPlan {
    pub fn fractional(train_fraction: f64, seed: u64) -> Self {
        Self {
            kind: SplitKind::Fractional { train_fraction },
            seed,
        }
    }

    pub fn balanced(per_class_count: usize, seed: u64) -> Self {
        Self {
            kind: SplitKind::Balanced {
                per_class_count,
                train_fraction: DEFAULT_INNER_TRAIN_FRACTION,
            },
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("record {0:?} has no label")]
    Unlabeled(String),
    #[error("train fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error("balanced plan needs a positive per-class count")]
    ZeroPerClass,
    #[error("balanced plan needs {requested} per class but only {negative} negative and {positive} positive records are available")]
    InsufficientClass {
        requested: usize,
        negative: usize,
        positive: usize,
    },
}

fn check_fraction(f: f64) -> Result<(), SplitError> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(SplitError::BadFraction(f))
    }
}

fn fractional_cut(mut items: Vec<SurveyRecord>, train_fraction: f64) -> (Vec<SurveyRecord>, Vec<SurveyRecord>) {
    let n_train = (train_fraction * items.len() as f64).round() as usize;
    let test = items.split_off(n_train.min(items.len()));
    (items, test)
}

/// Partitions labeled records into `(train, test)`.
///
/// The partition is a pure function of the input order and the plan.
pub fn split(records: &[SurveyRecord], plan: &SplitPlan) -> Result<(Vec<SurveyRecord>, Vec<SurveyRecord>), SplitError> {
    if let Some(r) = records.iter().find(|r| r.label.is_none()) {
        return Err(SplitError::Unlabeled(r.id.clone()));
    }
    let mut rng = rng::seeded(plan.seed);
    match plan.kind {
        SplitKind::Fractional { train_fraction } => {
            check_fraction(train_fraction)?;
            let mut pool = records.to_vec();
            rng::shuffle(&mut pool, &mut rng);
            Ok(fractional_cut(pool, train_fraction))
        }
        SplitKind::Balanced {
            per_class_count,
            train_fraction,
        } => {
            check_fraction(train_fraction)?;
            if per_class_count == 0 {
                return Err(SplitError::ZeroPerClass);
            }
            let (mut neg, mut pos): (Vec<_>, Vec<_>) = records
                .iter()
                .cloned()
                .partition(|r| r.label == Some(SentimentLabel::Negative));
            if neg.len() < per_class_count || pos.len() < per_class_count {
                return Err(SplitError::InsufficientClass {
                    requested: per_class_count,
                    negative: neg.len(),
                    positive: pos.len(),
                });
            }
            rng::shuffle(&mut neg, &mut rng);
            rng::shuffle(&mut pos, &mut rng);
            neg.truncate(per_class_count);
            pos.truncate(per_class_count);
            let mut pool = neg;
            pool.append(&mut pos);
            rng::shuffle(&mut pool, &mut rng);
            Ok(fractional_cut(pool, train_fraction))
        }
    }
}
