use rayon::prelude::*;

use super::attention::{attention, attention_backward};
use super::params::{EncoderParams, LayerParams};
use super::vocab::{TokenId, PAD};
use super::{EncoderError, N_CLASSES};
use crate::corpus::SentimentLabel;
use crate::scalar::Scalar;
use crate::tensor::Matrix;

const LN_EPS: f64 = 1e-12;

/// One encoded, labeled training or evaluation item.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub tokens: Vec<TokenId>,
    pub label: SentimentLabel,
}

/// Per-layer hidden states and attention weights from [`forward`].
///
/// Rows correspond to `positions`: the `[CLS]` slot (position 0) plus every
/// non-`[PAD]` position. `[PAD]` positions are masked out of attention and do
/// not influence any kept row, so they are not materialized.
#[derive(Clone, Debug, PartialEq)]
pub struct Activations<T> {
    pub positions: Vec<usize>,
    pub embeddings: Matrix<T>,
    pub layers: Vec<LayerActivation<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerActivation<T> {
    pub output: Matrix<T>,
    /// One `L × L` weight matrix per head.
    pub attention: Vec<Matrix<T>>,
}

struct NormCache<T> {
    xhat: Matrix<T>,
    inv_std: Vec<T>,
}

struct LayerCache<T> {
    x_in: Matrix<T>,
    q: Matrix<T>,
    k: Matrix<T>,
    v: Matrix<T>,
    probs: Vec<Matrix<T>>,
    concat: Matrix<T>,
    norm1: NormCache<T>,
    h1: Matrix<T>,
    z1: Matrix<T>,
    g: Matrix<T>,
    norm2: NormCache<T>,
    out: Matrix<T>,
}

struct ForwardCache<T> {
    positions: Vec<usize>,
    tokens: Vec<TokenId>,
    x0: Matrix<T>,
    layers: Vec<LayerCache<T>>,
    logits: [T; N_CLASSES],
}

fn layer_norm<T: Scalar>(x: &Matrix<T>, gain: &Matrix<T>, bias: &Matrix<T>) -> (Matrix<T>, NormCache<T>) {
    let d = T::of_count(x.cols());
    let eps = T::of(LN_EPS);
    let mut xhat = Matrix::zeros(x.rows(), x.cols());
    let mut y = Matrix::zeros(x.rows(), x.cols());
    let mut inv_std = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let row = x.row(i);
        let mean = row.iter().copied().sum::<T>() / d;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / d;
        let inv = T::one() / (var + eps).sqrt();
        inv_std.push(inv);
        for (j, &v) in row.iter().enumerate() {
            let h = (v - mean) * inv;
            xhat[(i, j)] = h;
            y[(i, j)] = h * gain.as_slice()[j] + bias.as_slice()[j];
        }
    }
    (y, NormCache { xhat, inv_std })
}

/// Returns `dx`; accumulates into `d_gain`, `d_bias`.
fn layer_norm_backward<T: Scalar>(
    dy: &Matrix<T>,
    cache: &NormCache<T>,
    gain: &Matrix<T>,
    d_gain: &mut Matrix<T>,
    d_bias: &mut Matrix<T>,
) -> Matrix<T> {
    let n = dy.cols();
    let d = T::of_count(n);
    let mut dx = Matrix::zeros(dy.rows(), n);
    for i in 0..dy.rows() {
        let g = dy.row(i);
        let xh = cache.xhat.row(i);
        let mut mean_dxh = T::zero();
        let mut mean_dxh_xh = T::zero();
        for j in 0..n {
            d_gain.as_mut_slice()[j] += g[j] * xh[j];
            d_bias.as_mut_slice()[j] += g[j];
            let dxh = g[j] * gain.as_slice()[j];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh[j];
        }
        mean_dxh /= d;
        mean_dxh_xh /= d;
        let inv = cache.inv_std[i];
        for j in 0..n {
            let dxh = g[j] * gain.as_slice()[j];
            dx[(i, j)] = inv * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
        }
    }
    dx
}

fn gelu<T: Scalar>(x: T) -> T {
    let half = T::of(0.5);
    half * x * (T::one() + (x * T::of(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let half = T::of(0.5);
    let cdf = half * (T::one() + (x * T::of(std::f64::consts::FRAC_1_SQRT_2)).erf());
    let pdf = (-half * x * x).exp() * T::of(1.0 / (2.0 * std::f64::consts::PI).sqrt());
    cdf + x * pdf
}

struct HeadOutputs<T> {
    q: Matrix<T>,
    k: Matrix<T>,
    v: Matrix<T>,
    probs: Vec<Matrix<T>>,
    concat: Matrix<T>,
}

fn heads_forward<T: Scalar>(x: &Matrix<T>, layer: &LayerParams<T>, n_heads: usize) -> Result<HeadOutputs<T>, EncoderError> {
    let q = x.matmul(&layer.wq);
    let k = x.matmul(&layer.wk);
    let v = x.matmul(&layer.wv);
    let d_k = q.cols() / n_heads;
    let mut concat = Matrix::zeros(x.rows(), q.cols());
    let mut probs = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let (out, w) = attention(
            &q.col_block(h * d_k, d_k),
            &k.col_block(h * d_k, d_k),
            &v.col_block(h * d_k, d_k),
        )?;
        concat.set_col_block(h * d_k, &out);
        probs.push(w);
    }
    Ok(HeadOutputs { q, k, v, probs, concat })
}

/// Multi-head self-attention: project `X` to `Q, K, V`, attend independently on
/// each `d_k`-wide slice, concatenate, and project by `W_o`.
pub fn multi_head<T: Scalar>(x: &Matrix<T>, layer: &LayerParams<T>, n_heads: usize) -> Result<Matrix<T>, EncoderError> {
    let d = layer.wq.rows();
    if n_heads == 0 || d % n_heads != 0 {
        return Err(EncoderError::Shape(format!("d_model {d} not divisible by {n_heads} heads")));
    }
    if x.cols() != d || x.rows() == 0 {
        return Err(EncoderError::Shape(format!("input {:?} for d_model {d}", x.shape())));
    }
    let heads = heads_forward(x, layer, n_heads)?;
    Ok(heads.concat.matmul(&layer.wo))
}

fn check_tokens<T: Scalar>(tokens: &[TokenId], params: &EncoderParams<T>) -> Result<(), EncoderError> {
    if tokens.len() != params.config.max_len {
        return Err(EncoderError::Shape(format!(
            "expected {} tokens, got {}",
            params.config.max_len,
            tokens.len()
        )));
    }
    let vocab_size = params.vocab_size();
    if let Some(&token) = tokens.iter().find(|&&t| t as usize >= vocab_size) {
        return Err(EncoderError::TokenOutOfRange { token, vocab_size });
    }
    Ok(())
}

fn forward_cached<T: Scalar>(tokens: &[TokenId], params: &EncoderParams<T>) -> Result<ForwardCache<T>, EncoderError> {
    check_tokens(tokens, params)?;
    let config = &params.config;
    let positions: Vec<usize> = (0..tokens.len()).filter(|&i| i == 0 || tokens[i] != PAD).collect();
    let kept_tokens: Vec<TokenId> = positions.iter().map(|&i| tokens[i]).collect();
    let token_rows: Vec<usize> = kept_tokens.iter().map(|&t| t as usize).collect();
    let x0 = params
        .token_embedding
        .gather_rows(&token_rows)
        .add(&params.position_embedding.gather_rows(&positions));

    let mut x = x0.clone();
    let mut layers = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let heads = heads_forward(&x, layer, config.n_heads)?;
        let attn_out = heads.concat.matmul(&layer.wo);
        let (h1, norm1) = layer_norm(&x.add(&attn_out), &layer.ln1_gain, &layer.ln1_bias);
        let mut z1 = h1.matmul(&layer.w1);
        z1.add_row_broadcast(layer.b1.as_slice());
        let g = z1.map(gelu);
        let mut f = g.matmul(&layer.w2);
        f.add_row_broadcast(layer.b2.as_slice());
        let (out, norm2) = layer_norm(&h1.add(&f), &layer.ln2_gain, &layer.ln2_bias);
        layers.push(LayerCache {
            x_in: x,
            q: heads.q,
            k: heads.k,
            v: heads.v,
            probs: heads.probs,
            concat: heads.concat,
            norm1,
            h1,
            z1,
            g,
            norm2,
            out: out.clone(),
        });
        x = out;
    }

    let cls = x.row(0);
    let mut logits = [T::zero(); N_CLASSES];
    for (c, logit) in logits.iter_mut().enumerate() {
        *logit = params.classifier_b.as_slice()[c]
            + cls
                .iter()
                .enumerate()
                .map(|(j, &h)| h * params.classifier_w[(j, c)])
                .sum::<T>();
    }
    Ok(ForwardCache {
        positions,
        tokens: kept_tokens,
        x0,
        layers,
        logits,
    })
}

/// Runs the encoder on exactly `max_len` token ids and returns the two class logits.
pub fn forward<T: Scalar>(tokens: &[TokenId], params: &EncoderParams<T>) -> Result<([T; N_CLASSES], Activations<T>), EncoderError> {
    let cache = forward_cached(tokens, params)?;
    let activations = Activations {
        positions: cache.positions,
        embeddings: cache.x0,
        layers: cache
            .layers
            .into_iter()
            .map(|l| LayerActivation {
                output: l.out,
                attention: l.probs,
            })
            .collect(),
    };
    Ok((cache.logits, activations))
}

/// Argmax of the logits; an exact tie resolves to Negative.
pub fn predict<T: Scalar>(tokens: &[TokenId], params: &EncoderParams<T>) -> Result<SentimentLabel, EncoderError> {
    let (logits, _) = forward(tokens, params)?;
    Ok(if logits[1] > logits[0] {
        SentimentLabel::Positive
    } else {
        SentimentLabel::Negative
    })
}

/// Cross-entropy of one example and the logit gradient scaled by `weight`.
fn softmax_ce<T: Scalar>(logits: &[T; N_CLASSES], label: SentimentLabel, weight: T) -> (T, [T; N_CLASSES]) {
    let max = logits[0].max(logits[1]);
    let sum = logits.iter().map(|&z| (z - max).exp()).sum::<T>();
    let log_z = max + sum.ln();
    let y = label.index();
    let loss = log_z - logits[y];
    let mut d = [T::zero(); N_CLASSES];
    for c in 0..N_CLASSES {
        let p = (logits[c] - log_z).exp();
        let target = if c == y { T::one() } else { T::zero() };
        d[c] = (p - target) * weight;
    }
    (loss, d)
}

fn backward<T: Scalar>(cache: &ForwardCache<T>, params: &EncoderParams<T>, d_logits: &[T; N_CLASSES]) -> EncoderParams<T> {
    let mut grads = params.zeros_like();
    let config = &params.config;
    let n = cache.positions.len();
    let d = config.d_model;

    let last = cache.layers.last().map_or(&cache.x0, |l| &l.out);
    let mut dx = Matrix::zeros(n, d);
    for j in 0..d {
        for c in 0..N_CLASSES {
            grads.classifier_w[(j, c)] += last[(0, j)] * d_logits[c];
            dx[(0, j)] += params.classifier_w[(j, c)] * d_logits[c];
        }
    }
    for c in 0..N_CLASSES {
        grads.classifier_b.as_mut_slice()[c] += d_logits[c];
    }

    let d_k = config.d_k();
    for (li, lc) in cache.layers.iter().enumerate().rev() {
        let p = &params.layers[li];
        let g = &mut grads.layers[li];

        let d_s2 = layer_norm_backward(&dx, &lc.norm2, &p.ln2_gain, &mut g.ln2_gain, &mut g.ln2_bias);
        // FFN branch
        g.w2.add_assign(&lc.g.t_matmul(&d_s2));
        for (b, s) in g.b2.as_mut_slice().iter_mut().zip(d_s2.col_sums()) {
            *b += s;
        }
        let d_g = d_s2.matmul_t(&p.w2);
        let mut d_z1 = d_g;
        for (dz, &z) in d_z1.as_mut_slice().iter_mut().zip(lc.z1.as_slice()) {
            *dz *= gelu_grad(z);
        }
        g.w1.add_assign(&lc.h1.t_matmul(&d_z1));
        for (b, s) in g.b1.as_mut_slice().iter_mut().zip(d_z1.col_sums()) {
            *b += s;
        }
        let mut d_h1 = d_z1.matmul_t(&p.w1);
        d_h1.add_assign(&d_s2);

        let d_s1 = layer_norm_backward(&d_h1, &lc.norm1, &p.ln1_gain, &mut g.ln1_gain, &mut g.ln1_bias);
        // attention branch
        g.wo.add_assign(&lc.concat.t_matmul(&d_s1));
        let d_concat = d_s1.matmul_t(&p.wo);
        let mut d_q = Matrix::zeros(n, d);
        let mut d_k_all = Matrix::zeros(n, d);
        let mut d_v = Matrix::zeros(n, d);
        for (h, probs) in lc.probs.iter().enumerate() {
            let off = h * d_k;
            let (dq, dk, dv) = attention_backward(
                &lc.q.col_block(off, d_k),
                &lc.k.col_block(off, d_k),
                &lc.v.col_block(off, d_k),
                probs,
                &d_concat.col_block(off, d_k),
            );
            d_q.set_col_block(off, &dq);
            d_k_all.set_col_block(off, &dk);
            d_v.set_col_block(off, &dv);
        }
        g.wq.add_assign(&lc.x_in.t_matmul(&d_q));
        g.wk.add_assign(&lc.x_in.t_matmul(&d_k_all));
        g.wv.add_assign(&lc.x_in.t_matmul(&d_v));
        let mut d_x = d_s1;
        d_x.add_assign(&d_q.matmul_t(&p.wq));
        d_x.add_assign(&d_k_all.matmul_t(&p.wk));
        d_x.add_assign(&d_v.matmul_t(&p.wv));
        dx = d_x;
    }

    for (row, (&pos, &tok)) in cache.positions.iter().zip(&cache.tokens).enumerate() {
        let src = dx.row(row);
        for (a, &b) in grads.token_embedding.row_mut(tok as usize).iter_mut().zip(src) {
            *a += b;
        }
        for (a, &b) in grads.position_embedding.row_mut(pos).iter_mut().zip(src) {
            *a += b;
        }
    }
    grads
}

/// Mean softmax cross-entropy over the batch and its exact gradient.
///
/// Examples are processed in parallel; per-example gradients are summed in
/// batch order, so the result does not depend on thread scheduling.
pub fn loss_and_grad<T: Scalar>(batch: &[Example], params: &EncoderParams<T>) -> Result<(T, EncoderParams<T>), EncoderError> {
    if batch.is_empty() {
        return Err(EncoderError::EmptyBatch);
    }
    let weight = T::one() / T::of_count(batch.len());
    let per_example: Vec<Result<(T, EncoderParams<T>), EncoderError>> = batch
        .par_iter()
        .enumerate()
        .map(|(index, ex)| {
            let cache = forward_cached(&ex.tokens, params)?;
            let (loss, d_logits) = softmax_ce(&cache.logits, ex.label, weight);
            if !loss.is_finite() {
                return Err(EncoderError::NonFiniteLoss { index });
            }
            Ok((loss, backward(&cache, params, &d_logits)))
        })
        .collect();

    let mut total = T::zero();
    let mut grads = params.zeros_like();
    for item in per_example {
        let (loss, g) = item?;
        total += loss;
        grads.accumulate(&g);
    }
    Ok((total * weight, grads))
}
