use super::EncoderError;
use crate::scalar::Scalar;
use crate::tensor::{softmax_in_place, Matrix};

/// Scaled dot-product attention.
///
/// Returns `(weights · V, weights)` where `weights = row_softmax(Q Kᵀ / √d_k)`
/// and `d_k` is the column count of `Q`.
pub fn attention<T: Scalar>(
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
) -> Result<(Matrix<T>, Matrix<T>), EncoderError> {
    if q.cols() == 0 || q.cols() != k.cols() || k.rows() != v.rows() || k.rows() == 0 {
        return Err(EncoderError::Shape(format!(
            "attention Q {:?}, K {:?}, V {:?}",
            q.shape(),
            k.shape(),
            v.shape()
        )));
    }
    if !(q.is_finite() && k.is_finite() && v.is_finite()) {
        return Err(EncoderError::NonFinite("attention"));
    }
    let scale = T::one() / T::of_count(q.cols()).sqrt();
    let mut weights = q.matmul_t(k);
    weights.scale(scale);
    for i in 0..weights.rows() {
        softmax_in_place(weights.row_mut(i));
    }
    let out = weights.matmul(v);
    Ok((out, weights))
}

/// Gradients of [`attention`] with respect to `(Q, K, V)` given the upstream
/// gradient of its output and the weights it returned.
pub fn attention_backward<T: Scalar>(
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
    weights: &Matrix<T>,
    d_out: &Matrix<T>,
) -> (Matrix<T>, Matrix<T>, Matrix<T>) {
    let scale = T::one() / T::of_count(q.cols()).sqrt();
    let d_v = weights.t_matmul(d_out);
    let d_w = d_out.matmul_t(v);
    // softmax Jacobian, row by row: dS = P ⊙ (dP − Σ_j dP_j P_j)
    let mut d_scores = Matrix::zeros(weights.rows(), weights.cols());
    for i in 0..weights.rows() {
        let p = weights.row(i);
        let g = d_w.row(i);
        let inner = crate::tensor::dot(p, g);
        for ((s, &pj), &gj) in d_scores.row_mut(i).iter_mut().zip(p).zip(g) {
            *s = pj * (gj - inner) * scale;
        }
    }
    let d_q = d_scores.matmul(k);
    let d_k = d_scores.t_matmul(q);
    (d_q, d_k, d_v)
}
