//! Exact digital reference activations.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Softmax with max-subtraction.
pub fn softmax_ref<T: Scalar>(x: &[T]) -> Result<Vec<T>> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let m = x.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let e: Vec<T> = x.iter().map(|&v| (v - m).exp()).collect();
    let z: T = e.iter().copied().sum();
    Ok(e.into_iter().map(|v| v / z).collect())
}

#[inline]
pub fn logistic<T: Scalar>(u: T) -> T {
    if u >= T::zero() {
        T::one() / (T::one() + (-u).exp())
    } else {
        let e = u.exp();
        e / (T::one() + e)
    }
}

/// Elementwise `1 / (1 + exp(-(x + bias)))`.
pub fn sigmoid_ref<T: Scalar>(x: &[T], bias: T) -> Vec<T> {
    x.iter().map(|&v| logistic(v + bias)).collect()
}

/// Sequence-length dependent sigmoid-attention bias `-ln(n)`.
pub fn default_bias<T: Scalar>(n: usize) -> T {
    assert!(n >= 1, "sequence length must be >= 1");
    -T::from_usize_lossy(n).ln()
}
