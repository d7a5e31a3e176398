//! A small DistilBERT-shaped encoder classifier with hand-written backprop.
//!
//! Token and position embeddings feed `n_layers` post-norm blocks of
//! multi-head self-attention and a GELU feed-forward network. The vector at
//! the `[CLS]` position goes through a linear head producing two logits
//! (index 0 Negative, index 1 Positive).

mod attention;
mod checkpoint;
mod model;
mod params;
mod vocab;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use attention::{attention, attention_backward};
pub use checkpoint::{load_checkpoint, save_checkpoint, sidecar_path, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use model::{forward, loss_and_grad, multi_head, predict, Activations, Example, LayerActivation};
pub use params::{param_group, EncoderParams, FreezeMask, LayerParams, INIT_STD};
pub use vocab::{build_vocab, encode_text, TokenId, Vocabulary, CLS, PAD, UNK};

pub const N_CLASSES: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub n_classes: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_heads: 4,
            n_layers: 2,
            d_ff: 128,
            max_len: 64,
            n_classes: N_CLASSES,
        }
    }
}

impl EncoderConfig {
    pub fn d_k(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |m: String| Err(EncoderError::InvalidConfig(m));
        if self.d_model == 0 || self.n_heads == 0 || self.n_layers == 0 || self.d_ff == 0 || self.max_len == 0 {
            return bad(format!("all dimensions must be positive: {self:?}"));
        }
        if self.d_model % self.n_heads != 0 {
            return bad(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if self.n_classes != N_CLASSES {
            return bad(format!("n_classes must be {N_CLASSES}, got {}", self.n_classes));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),
    #[error("token id {token} out of range for vocabulary of {vocab_size}")]
    TokenOutOfRange { token: TokenId, vocab_size: usize },
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite loss at batch element {index}")]
    NonFiniteLoss { index: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
}
