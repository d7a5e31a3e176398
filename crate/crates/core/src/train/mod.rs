//! Fine-tuning loop: shuffled mini-batches, linear warmup, AdamW, and the
//! three experimental approach presets.

mod optim;
mod schedule;

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use optim::{AdamHyper, AdamState};
pub use schedule::lr_at;

use crate::corpus::{SplitPlan, SurveyRecord};
use crate::encoder::{
    build_vocab, encode_text, loss_and_grad, Checkpoint, EncoderConfig, EncoderError, EncoderParams, Example, FreezeMask,
    Vocabulary,
};
use crate::rng;
use crate::scalar::Scalar;

/// Conventional BERT fine-tuning rate; the library default.
pub const DEFAULT_LEARNING_RATE: f64 = 5e-5;
/// Rate for training the small encoder from random initialization.
pub const DESK_LEARNING_RATE: f64 = 1e-3;
pub const DEFAULT_SEED: u64 = 42;

const SHUFFLE_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub num_train_epochs: usize,
    pub train_batch_size: usize,
    pub eval_batch_size: usize,
    pub warmup_steps: usize,
    pub weight_decay: f64,
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub freeze: FreezeMask,
}

impl Default for TrainConfig {
    /// Hyperparameters of the first approach.
    fn default() -> Self {
        Self {
            num_train_epochs: 7,
            train_batch_size: 16,
            eval_batch_size: 64,
            warmup_steps: 500,
            weight_decay: 0.01,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed: DEFAULT_SEED,
            freeze: FreezeMask::none(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_owned()));
        if self.num_train_epochs == 0 {
            return bad("num_train_epochs must be at least 1");
        }
        if self.train_batch_size == 0 || self.eval_batch_size == 0 {
            return bad("batch sizes must be at least 1");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be a finite value >= 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a finite value > 0");
        }
        Ok(())
    }

    fn hyper(&self) -> AdamHyper {
        AdamHyper {
            weight_decay: self.weight_decay,
            ..AdamHyper::default()
        }
    }
}

/// The three split/epoch regimes compared in the experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Approach {
    /// 80/20 split of the full corpus, 7 epochs.
    First,
    /// 350 + 350 balanced pool, 9 epochs.
    Second,
    /// 90/10 split of the full corpus, 5 epochs.
    Third,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::First, Approach::Second, Approach::Third];

    pub fn id(self) -> u8 {
        match self {
            Approach::First => 1,
            Approach::Second => 2,
            Approach::Third => 3,
        }
    }

    /// Row label used in metric tables.
    pub fn label(self) -> &'static str {
        match self {
            Approach::First => "First(data 80-20)",
            Approach::Second => "Second(data 50-50)",
            Approach::Third => "Third(data 90-10)",
        }
    }
}

impl TryFrom<u8> for Approach {
    type Error = String;

    fn try_from(n: u8) -> Result<Self, Self::Error> {
        match n {
            1 => Ok(Approach::First),
            2 => Ok(Approach::Second),
            3 => Ok(Approach::Third),
            other => Err(format!("approach must be 1, 2 or 3, got {other}")),
        }
    }
}

impl From<Approach> for u8 {
    fn from(a: Approach) -> u8 {
        a.id()
    }
}

impl FromStr for Approach {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let n: u8 = s.parse().map_err(|_| format!("approach must be 1, 2 or 3, got {s:?}"))?;
        Approach::try_from(n)
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

pub const BALANCED_PER_CLASS: usize = 350;

/// Training hyperparameters and split plan for one approach. Only the epoch
/// count and the split differ between approaches.
pub fn approach_config(approach: Approach, seed: u64) -> (TrainConfig, SplitPlan) {
    let base = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    match approach {
        Approach::First => (TrainConfig { num_train_epochs: 7, ..base }, SplitPlan::fractional(0.8, seed)),
        Approach::Second => (
            TrainConfig { num_train_epochs: 9, ..base },
            SplitPlan::balanced(BALANCED_PER_CLASS, seed),
        ),
        Approach::Third => (TrainConfig { num_train_epochs: 5, ..base }, SplitPlan::fractional(0.9, seed)),
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("record {0:?} has no label")]
    Unlabeled(String),
    #[error("non-finite loss in epoch {epoch}, step {step}, batch element {index}")]
    NonFiniteLoss { epoch: usize, step: usize, index: usize },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error("epoch callback: {0}")]
    Callback(String),
}

/// One line of the training-history file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Learning rate of the last update in the epoch.
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome<T> {
    pub params: EncoderParams<T>,
    pub history: Vec<EpochStats>,
}

pub fn train<T: Scalar>(examples: &[Example], config: &TrainConfig, init: EncoderParams<T>) -> Result<TrainOutcome<T>, TrainError> {
    train_with(examples, config, init, |_, _| Ok(()))
}

/// [`train`] with a hook called after every epoch (for per-epoch checkpoints).
///
/// Each epoch visits the examples in a fresh seeded permutation, in batches of
/// `train_batch_size` (the last batch may be short). Update `s` (0-based,
/// counted across epochs) uses `lr_at(s, learning_rate, warmup_steps)`.
pub fn train_with<T: Scalar>(
    examples: &[Example],
    config: &TrainConfig,
    init: EncoderParams<T>,
    mut on_epoch: impl FnMut(&EpochStats, &EncoderParams<T>) -> Result<(), String>,
) -> Result<TrainOutcome<T>, TrainError> {
    config.validate()?;
    if examples.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    let mut params = init;
    let names = params.tensor_names();
    let trainable: Vec<bool> = names.iter().map(|n| !config.freeze.is_frozen(n)).collect();
    let mut states: Vec<AdamState<T>> = params.tensors().iter().map(|t| AdamState::new(t.len())).collect();
    let hyper = config.hyper();
    let base_lr = T::of(config.learning_rate);

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut shuffler = rng::seeded_stream(config.seed, SHUFFLE_STREAM);
    let mut step = 0usize;
    let mut history = Vec::with_capacity(config.num_train_epochs);

    for epoch in 1..=config.num_train_epochs {
        rng::shuffle(&mut order, &mut shuffler);
        let mut loss_sum = 0.0;
        let mut lr = T::zero();
        for chunk in order.chunks(config.train_batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| examples[i].clone()).collect();
            let (loss, grads) = loss_and_grad(&batch, &params).map_err(|e| match e {
                EncoderError::NonFiniteLoss { index } => TrainError::NonFiniteLoss { epoch, step, index },
                other => TrainError::Encoder(other),
            })?;
            loss_sum += loss.as_f64() * chunk.len() as f64;

            lr = lr_at(step, base_lr, config.warmup_steps);
            let t = u32::try_from(step + 1).expect("step count fits in u32");
            for (((p, g), state), &train_it) in params
                .tensors_mut()
                .into_iter()
                .zip(grads.tensors())
                .zip(&mut states)
                .zip(&trainable)
            {
                if train_it {
                    state.step(p.as_mut_slice(), g.as_slice(), t, lr, &hyper);
                }
            }
            step += 1;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / examples.len() as f64,
            lr: lr.as_f64(),
        };
        on_epoch(&stats, &params).map_err(TrainError::Callback)?;
        history.push(stats);
    }
    Ok(TrainOutcome { params, history })
}

/// Encodes labeled records into examples; fails on the first unlabeled record.
pub fn encode_records(records: &[SurveyRecord], vocab: &Vocabulary, max_len: usize) -> Result<Vec<Example>, TrainError> {
    records
        .iter()
        .map(|r| {
            let label = r.label.ok_or_else(|| TrainError::Unlabeled(r.id.clone()))?;
            Ok(Example {
                tokens: encode_text(&r.text, vocab, max_len),
                label,
            })
        })
        .collect()
}

/// Options for [`fit_records`] beyond the hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub encoder: EncoderConfig,
    pub vocab_min_count: usize,
    pub attention_only: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            vocab_min_count: 1,
            attention_only: false,
        }
    }
}

/// Builds a vocabulary from the training texts, initializes an encoder from
/// `config.seed`, and trains it. `on_epoch` also receives the vocabulary so
/// it can write complete per-epoch checkpoints.
pub fn fit_records<T: Scalar>(
    records: &[SurveyRecord],
    config: &TrainConfig,
    opts: &FitOptions,
    mut on_epoch: impl FnMut(&EpochStats, &EncoderParams<T>, &Vocabulary) -> Result<(), String>,
) -> Result<(Checkpoint<T>, Vec<EpochStats>), TrainError> {
    if let Some(r) = records.iter().find(|r| r.label.is_none()) {
        return Err(TrainError::Unlabeled(r.id.clone()));
    }
    if records.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
    let vocab = build_vocab(&texts, opts.vocab_min_count)?;
    let examples = encode_records(records, &vocab, opts.encoder.max_len)?;
    let init = EncoderParams::<T>::init(opts.encoder, vocab.len(), config.seed)?;
    let mut config = config.clone();
    if opts.attention_only {
        config.freeze = FreezeMask::attention_only(&init);
    }
    let outcome = train_with(&examples, &config, init, |s, p| on_epoch(s, p, &vocab))?;
    Ok((
        Checkpoint {
            params: outcome.params,
            vocab,
        },
        outcome.history,
    ))
}

/// Writes the history as JSONL, one `{"epoch", "mean_loss", "lr"}` object per line.
pub fn write_history<W: Write>(mut w: W, history: &[EpochStats]) -> io::Result<()> {
    for h in history {
        serde_json::to_writer(&mut w, h)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}
