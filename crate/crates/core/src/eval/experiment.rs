use rayon::prelude::*;
use thiserror::Error;

use super::metrics::confusion;
use super::report::MetricsReport;
use crate::corpus::{split, SentimentLabel, SplitError, SurveyRecord};
use crate::encoder::{predict, Checkpoint, EncoderError, Example};
use crate::scalar::Scalar;
use crate::train::{approach_config, encode_records, fit_records, Approach, EpochStats, FitOptions, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error("test split is empty")]
    EmptyTestSet,
}

/// Overrides applied on top of an approach's preset hyperparameters.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub train_batch_size: Option<usize>,
    pub warmup_steps: Option<usize>,
    pub weight_decay: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, mut config: TrainConfig) -> TrainConfig {
        if let Some(v) = self.epochs {
            config.num_train_epochs = v;
        }
        if let Some(v) = self.learning_rate {
            config.learning_rate = v;
        }
        if let Some(v) = self.train_batch_size {
            config.train_batch_size = v;
        }
        if let Some(v) = self.warmup_steps {
            config.warmup_steps = v;
        }
        if let Some(v) = self.weight_decay {
            config.weight_decay = v;
        }
        config
    }
}

/// Everything one approach run produces.
#[derive(Clone, Debug)]
pub struct ApproachRun<T> {
    pub report: MetricsReport,
    pub config: TrainConfig,
    pub checkpoint: Checkpoint<T>,
    pub history: Vec<EpochStats>,
    pub train_size: usize,
    pub test_size: usize,
}

/// Predicts every example, `batch_size` at a time, keeping input order.
pub fn predict_all<T: Scalar>(examples: &[Example], checkpoint: &Checkpoint<T>, batch_size: usize) -> Result<Vec<SentimentLabel>, EncoderError> {
    let mut out = Vec::with_capacity(examples.len());
    for chunk in examples.chunks(batch_size.max(1)) {
        let preds: Result<Vec<_>, _> = chunk.par_iter().map(|e| predict(&e.tokens, &checkpoint.params)).collect();
        out.extend(preds?);
    }
    Ok(out)
}

/// Scores a trained model on labeled records.
pub fn evaluate<T: Scalar>(
    approach: Approach,
    records: &[SurveyRecord],
    checkpoint: &Checkpoint<T>,
    eval_batch_size: usize,
) -> Result<MetricsReport, ExperimentError> {
    if records.is_empty() {
        return Err(ExperimentError::EmptyTestSet);
    }
    let examples = encode_records(records, &checkpoint.vocab, checkpoint.params.config.max_len)?;
    let predictions = predict_all(&examples, checkpoint, eval_batch_size)?;
    let truths: Vec<SentimentLabel> = examples.iter().map(|e| e.label).collect();
    let cm = confusion(&predictions, &truths, SentimentLabel::Negative).expect("equal lengths");
    Ok(MetricsReport::from_confusion(approach, cm))
}

/// Split per the approach preset, train on the train side, and score the
/// test side. A pure function of its arguments.
pub fn run_approach<T: Scalar>(
    corpus: &[SurveyRecord],
    approach: Approach,
    seed: u64,
    fit: &FitOptions,
    overrides: &Overrides,
) -> Result<ApproachRun<T>, ExperimentError> {
    let (config, plan) = approach_config(approach, seed);
    let config = overrides.apply(config);
    let (train_set, test_set) = split(corpus, &plan)?;
    if test_set.is_empty() {
        return Err(ExperimentError::EmptyTestSet);
    }
    let (checkpoint, history) = fit_records::<T>(&train_set, &config, fit, |s, _, _| {
        log::info!("approach {approach} epoch {} mean loss {:.6}", s.epoch, s.mean_loss);
        Ok(())
    })?;
    let report = evaluate(approach, &test_set, &checkpoint, config.eval_batch_size)?;
    Ok(ApproachRun {
        report,
        config,
        checkpoint,
        history,
        train_size: train_set.len(),
        test_size: test_set.len(),
    })
}
