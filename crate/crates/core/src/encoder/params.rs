use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EncoderConfig, EncoderError, N_CLASSES};
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Standard deviation of the truncated-normal weight initializer.
pub const INIT_STD: f64 = 0.02;

/// Weights of one encoder block. Bias and norm vectors are stored as `1 × n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams<T> {
    pub wq: Matrix<T>,
    pub wk: Matrix<T>,
    pub wv: Matrix<T>,
    pub wo: Matrix<T>,
    pub ln1_gain: Matrix<T>,
    pub ln1_bias: Matrix<T>,
    pub w1: Matrix<T>,
    pub b1: Matrix<T>,
    pub w2: Matrix<T>,
    pub b2: Matrix<T>,
    pub ln2_gain: Matrix<T>,
    pub ln2_bias: Matrix<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams<T> {
    pub config: EncoderConfig,
    pub token_embedding: Matrix<T>,
    pub position_embedding: Matrix<T>,
    pub layers: Vec<LayerParams<T>>,
    pub classifier_w: Matrix<T>,
    pub classifier_b: Matrix<T>,
}

const LAYER_TENSORS: [&str; 12] = [
    "attention.wq",
    "attention.wk",
    "attention.wv",
    "attention.wo",
    "attention_norm.gain",
    "attention_norm.bias",
    "ffn.w1",
    "ffn.b1",
    "ffn.w2",
    "ffn.b2",
    "output_norm.gain",
    "output_norm.bias",
];

impl<T: Scalar> LayerParams<T> {
    fn zeros(c: &EncoderConfig) -> Self {
        let (d, f) = (c.d_model, c.d_ff);
        Self {
            wq: Matrix::zeros(d, d),
            wk: Matrix::zeros(d, d),
            wv: Matrix::zeros(d, d),
            wo: Matrix::zeros(d, d),
            ln1_gain: Matrix::zeros(1, d),
            ln1_bias: Matrix::zeros(1, d),
            w1: Matrix::zeros(d, f),
            b1: Matrix::zeros(1, f),
            w2: Matrix::zeros(f, d),
            b2: Matrix::zeros(1, d),
            ln2_gain: Matrix::zeros(1, d),
            ln2_bias: Matrix::zeros(1, d),
        }
    }

    fn tensors(&self) -> [&Matrix<T>; 12] {
        [
            &self.wq,
            &self.wk,
            &self.wv,
            &self.wo,
            &self.ln1_gain,
            &self.ln1_bias,
            &self.w1,
            &self.b1,
            &self.w2,
            &self.b2,
            &self.ln2_gain,
            &self.ln2_bias,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Matrix<T>; 12] {
        [
            &mut self.wq,
            &mut self.wk,
            &mut self.wv,
            &mut self.wo,
            &mut self.ln1_gain,
            &mut self.ln1_bias,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.ln2_gain,
            &mut self.ln2_bias,
        ]
    }
}

impl<T: Scalar> EncoderParams<T> {
    /// All-zero parameters; the shape template for gradients.
    pub fn zeros(config: EncoderConfig, vocab_size: usize) -> Self {
        let d = config.d_model;
        Self {
            config,
            token_embedding: Matrix::zeros(vocab_size, d),
            position_embedding: Matrix::zeros(config.max_len, d),
            layers: (0..config.n_layers).map(|_| LayerParams::zeros(&config)).collect(),
            classifier_w: Matrix::zeros(d, N_CLASSES),
            classifier_b: Matrix::zeros(1, N_CLASSES),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config, self.vocab_size())
    }

    /// Weights and embeddings drawn from a normal truncated at ±2σ (σ = 0.02),
    /// biases zero, layer-norm gains one.
    pub fn init(config: EncoderConfig, vocab_size: usize, seed: u64) -> Result<Self, EncoderError> {
        config.validate()?;
        let mut source = rng::seeded(seed);
        let mut p = Self::zeros(config, vocab_size);
        p.init_with(|std| rng::truncated_normal(&mut source, std), INIT_STD);
        Ok(p)
    }

    /// Like [`init`](Self::init) but with every tensor (including biases and
    /// norm parameters) perturbed by `N(0, std²)` around its usual init value.
    /// Produces well-conditioned, non-degenerate parameters for numerical checks.
    pub fn init_dense(config: EncoderConfig, vocab_size: usize, seed: u64, std: f64) -> Result<Self, EncoderError> {
        config.validate()?;
        let mut source = rng::seeded(seed);
        let mut p = Self::zeros(config, vocab_size);
        for (name, t) in p.named_tensors_mut() {
            let base = if name.ends_with(".gain") { 1.0 } else { 0.0 };
            for x in t.as_mut_slice() {
                *x = T::of(base + std * source.sample::<f64, _>(rand_distr::StandardNormal));
            }
        }
        Ok(p)
    }

    fn init_with(&mut self, mut draw: impl FnMut(f64) -> f64, std: f64) {
        for (name, t) in self.named_tensors_mut() {
            let fill = if name.ends_with(".gain") {
                Some(T::one())
            } else if name.ends_with(".bias") || name.ends_with(".b1") || name.ends_with(".b2") {
                Some(T::zero())
            } else {
                None
            };
            match fill {
                Some(v) => t.fill(v),
                None => t.as_mut_slice().iter_mut().for_each(|x| *x = T::of(draw(std))),
            }
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.token_embedding.rows()
    }

    /// Canonical tensor order, shared by the optimizer and checkpoint files.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = vec!["embeddings.token.weight".to_owned(), "embeddings.position.weight".to_owned()];
        for l in 0..self.layers.len() {
            names.extend(LAYER_TENSORS.iter().map(|t| format!("layer{l}.{t}")));
        }
        names.push("classifier.weight".to_owned());
        names.push("classifier.bias".to_owned());
        names
    }

    pub fn tensors(&self) -> Vec<&Matrix<T>> {
        let mut out = vec![&self.token_embedding, &self.position_embedding];
        for l in &self.layers {
            out.extend(l.tensors());
        }
        out.push(&self.classifier_w);
        out.push(&self.classifier_b);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut out = vec![&mut self.token_embedding, &mut self.position_embedding];
        for l in &mut self.layers {
            out.extend(l.tensors_mut());
        }
        out.push(&mut self.classifier_w);
        out.push(&mut self.classifier_b);
        out
    }

    pub fn named_tensors(&self) -> Vec<(String, &Matrix<T>)> {
        self.tensor_names().into_iter().zip(self.tensors()).collect()
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Matrix<T>)> {
        self.tensor_names().into_iter().zip(self.tensors_mut()).collect()
    }

    /// Distinct parameter groups in canonical order.
    pub fn groups(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.tensor_names()
            .iter()
            .map(|n| param_group(n).to_owned())
            .filter(|g| seen.insert(g.clone()))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// `self += other`, tensor by tensor.
    pub fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn cast<U: Scalar>(&self) -> EncoderParams<U> {
        let mut out = EncoderParams::<U>::zeros(self.config, self.vocab_size());
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            *dst = src.cast();
        }
        out
    }
}

/// Group of a tensor name: everything before the last `.`.
pub fn param_group(tensor_name: &str) -> &str {
    tensor_name.rsplit_once('.').map_or(tensor_name, |(g, _)| g)
}

/// Parameter groups excluded from optimizer updates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreezeMask {
    pub frozen: BTreeSet<String>,
}

impl FreezeMask {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn all<T: Scalar>(params: &EncoderParams<T>) -> Self {
        Self {
            frozen: params.groups().into_iter().collect(),
        }
    }

    /// Freezes everything except the self-attention projections.
    pub fn attention_only<T: Scalar>(params: &EncoderParams<T>) -> Self {
        Self {
            frozen: params
                .groups()
                .into_iter()
                .filter(|g| !g.ends_with(".attention"))
                .collect(),
        }
    }

    pub fn is_frozen(&self, tensor_name: &str) -> bool {
        self.frozen.contains(param_group(tensor_name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EncoderConfig {
        EncoderConfig {
            d_model: 8,
            n_heads: 2,
            n_layers: 2,
            d_ff: 16,
            max_len: 6,
            n_classes: 2,
        }
    }

    #[test]
    fn names_match_tensors() {
        let p = EncoderParams::<f64>::init(tiny(), 12, 0).unwrap();
        let names = p.tensor_names();
        assert_eq!(names.len(), p.tensors().len());
        assert_eq!(names.len(), 2 + 2 * 12 + 2);
        assert_eq!(names[2], "layer0.attention.wq");
        let expected = 12 * 8 + 6 * 8 + 2 * (4 * 64 + 4 * 8 + 8 * 16 + 16 + 16 * 8 + 8) + 8 * 2 + 2;
        assert_eq!(p.parameter_count(), expected);
    }

    #[test]
    fn init_is_seeded_and_structured() {
        let a = EncoderParams::<f64>::init(tiny(), 12, 5).unwrap();
        let b = EncoderParams::<f64>::init(tiny(), 12, 5).unwrap();
        let c = EncoderParams::<f64>::init(tiny(), 12, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.layers[0].ln1_gain.as_slice().iter().all(|&g| g == 1.0));
        assert!(a.layers[1].b1.as_slice().iter().all(|&g| g == 0.0));
        assert!(a.token_embedding.as_slice().iter().all(|x| x.abs() <= 2.0 * INIT_STD));
        assert!(a.token_embedding.as_slice().iter().any(|&x| x != 0.0));
    }

    #[test]
    fn groups_and_masks() {
        let p = EncoderParams::<f32>::zeros(tiny(), 12);
        let groups = p.groups();
        assert_eq!(groups[0], "embeddings.token");
        assert!(groups.contains(&"layer1.attention".to_owned()));
        let mask = FreezeMask::attention_only(&p);
        assert!(!mask.is_frozen("layer0.attention.wk"));
        assert!(mask.is_frozen("layer0.ffn.w1"));
        assert!(mask.is_frozen("classifier.bias"));
        let all = FreezeMask::all(&p);
        assert!(p.tensor_names().iter().all(|n| all.is_frozen(n)));
    }
}
