//! Adam with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// First and second moment estimates for one tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }

    /// Applies update number `t` (1-based) to `params` in place:
    ///
    /// ```text
    /// p ← p − lr·λ·p
    /// m ← β₁m + (1−β₁)g        v ← β₂v + (1−β₂)g²
    /// p ← p − lr · (m / (1−β₁ᵗ)) / (√(v / (1−β₂ᵗ)) + ε)
    /// ```
    pub fn step(&mut self, params: &mut [T], grads: &[T], t: u32, lr: T, hyper: &AdamHyper) {
        assert_eq!(params.len(), self.m.len(), "parameter length mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient length mismatch");
        assert!(t >= 1, "Adam steps are 1-based");
        let (b1, b2) = (T::of(hyper.beta1), T::of(hyper.beta2));
        let eps = T::of(hyper.eps);
        let decay = lr * T::of(hyper.weight_decay);
        let bc1 = T::one() - b1.powi(t as i32);
        let bc2 = T::one() - b2.powi(t as i32);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *p -= decay * *p;
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
