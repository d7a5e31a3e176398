use crate::scalar::Scalar;

/// Linear warmup from zero to `base_lr` over `warmup_steps`, constant afterwards.
pub fn lr_at<T: Scalar>(step: usize, base_lr: T, warmup_steps: usize) -> T {
    if step >= warmup_steps {
        base_lr
    } else {
        base_lr * T::of_count(step) / T::of_count(warmup_steps)
    }
}
