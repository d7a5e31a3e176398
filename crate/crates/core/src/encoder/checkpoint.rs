//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! magic      8 bytes  "SSENTENC"
//! version    u32      1
//! d_model, n_heads, n_layers, d_ff, max_len, n_classes, vocab_size, tensor_count
//! tensors    f64 LE, row-major, in EncoderParams::tensor_names() order
//! ```
//!
//! A sidecar JSON (same path, `.json` extension) carries the config, the
//! vocabulary in id order, and the tensor names and shapes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EncoderConfig, EncoderError, EncoderParams, Vocabulary};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"SSENTENC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct TensorShape {
    name: String,
    shape: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    format_version: u32,
    config: EncoderConfig,
    vocab: Vocabulary,
    tensors: Vec<TensorShape>,
}

/// A trained model: parameters plus the vocabulary that produced its inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub params: EncoderParams<T>,
    pub vocab: Vocabulary,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn header_fields(config: &EncoderConfig, vocab_size: usize, tensor_count: usize) -> [u32; 8] {
    [
        config.d_model,
        config.n_heads,
        config.n_layers,
        config.d_ff,
        config.max_len,
        config.n_classes,
        vocab_size,
        tensor_count,
    ]
    .map(|v| v as u32)
}

pub fn save_checkpoint<T: Scalar>(path: &Path, params: &EncoderParams<T>, vocab: &Vocabulary) -> Result<(), EncoderError> {
    if vocab.len() != params.vocab_size() {
        return Err(EncoderError::Checkpoint(format!(
            "vocabulary has {} tokens but embeddings have {} rows",
            vocab.len(),
            params.vocab_size()
        )));
    }
    let tensors = params.tensors();
    let mut buf = Vec::with_capacity(44 + 8 * params.parameter_count());
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in header_fields(&params.config, params.vocab_size(), tensors.len()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for t in &tensors {
        for &x in t.as_slice() {
            buf.extend_from_slice(&x.as_f64().to_le_bytes());
        }
    }
    fs::write(path, buf)?;

    let sidecar = Sidecar {
        format_version: CHECKPOINT_VERSION,
        config: params.config,
        vocab: vocab.clone(),
        tensors: params
            .named_tensors()
            .into_iter()
            .map(|(name, t)| TensorShape {
                name,
                shape: [t.rows(), t.cols()],
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&sidecar).map_err(|e| EncoderError::Checkpoint(e.to_string()))?;
    fs::write(sidecar_path(path), json)?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>, EncoderError> {
    let bad = |m: String| EncoderError::Checkpoint(format!("{}: {m}", path.display()));
    let raw = fs::read(path)?;
    let sidecar_raw = fs::read_to_string(sidecar_path(path))?;
    let sidecar: Sidecar = serde_json::from_str(&sidecar_raw).map_err(|e| bad(format!("sidecar: {e}")))?;

    if raw.len() < 44 || raw[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let word = |i: usize| u32::from_le_bytes(raw[8 + 4 * i..12 + 4 * i].try_into().expect("4 bytes"));
    let version = word(0);
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let fields: Vec<u32> = (1..=8).map(word).collect();
    let config = EncoderConfig {
        d_model: fields[0] as usize,
        n_heads: fields[1] as usize,
        n_layers: fields[2] as usize,
        d_ff: fields[3] as usize,
        max_len: fields[4] as usize,
        n_classes: fields[5] as usize,
    };
    config.validate()?;
    let vocab_size = fields[6] as usize;
    if config != sidecar.config || vocab_size != sidecar.vocab.len() {
        return Err(bad("binary header disagrees with sidecar".into()));
    }

    let mut params = EncoderParams::<T>::zeros(config, vocab_size);
    if fields[7] as usize != params.tensors().len() {
        return Err(bad(format!("expected {} tensors, header says {}", params.tensors().len(), fields[7])));
    }
    let body = &raw[44..];
    if body.len() != 8 * params.parameter_count() {
        return Err(bad(format!(
            "expected {} bytes of weights, found {}",
            8 * params.parameter_count(),
            body.len()
        )));
    }
    let mut values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for t in params.tensors_mut() {
        for x in t.as_mut_slice() {
            *x = T::of(values.next().expect("length checked"));
        }
    }
    Ok(Checkpoint {
        params,
        vocab: sidecar.vocab,
    })
}
