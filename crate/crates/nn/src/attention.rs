//! Scaled dot-product attention `f(QKᵀ/√d_k)·V` with a pluggable `f`.

use eoattn_core::activation::Nonlinearity;
use eoattn_core::Scalar;

use crate::error::{shape_err, Error, Result};
use crate::tensor::{ActMode, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionConfig<T> {
    pub n: usize,
    pub d_k: usize,
    pub heads: usize,
    pub nonlinearity: Nonlinearity<T>,
    pub causal: bool,
}

impl<T: Scalar> AttentionConfig<T> {
    pub fn new(n: usize, d_k: usize, nonlinearity: Nonlinearity<T>) -> Result<Self> {
        if d_k == 0 || n == 0 {
            return Err(Error::InvalidConfig(format!(
                "need n >= 1 and d_k >= 1, got n = {n}, d_k = {d_k}"
            )));
        }
        Ok(Self {
            n,
            d_k,
            heads: 1,
            nonlinearity,
            causal: false,
        })
    }

    pub fn causal(mut self, on: bool) -> Self {
        self.causal = on;
        self
    }

    pub fn scale(&self) -> T {
        T::from_usize_lossy(self.d_k).sqrt().recip()
    }
}

/// `q`, `k`: `[..., n, d_k]`; `v`: `[..., n, d_v]`.
pub fn attention_forward<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    v: &Tensor<T>,
    cfg: &AttentionConfig<T>,
    mode: ActMode<'_>,
) -> Result<Tensor<T>> {
    let weights = attention_weights(q, k, cfg, mode)?;
    let (vs, ws) = (v.shape(), weights.shape());
    if vs.len() != ws.len() || vs[vs.len() - 2] != cfg.n {
        return Err(shape_err(format!(
            "values {vs:?} do not match weights {ws:?}"
        )));
    }
    weights.matmul(v)
}

/// `f(QKᵀ/√d_k)` before the value product.
pub fn attention_weights<T: Scalar>(
    q: &Tensor<T>,
    k: &Tensor<T>,
    cfg: &AttentionConfig<T>,
    mode: ActMode<'_>,
) -> Result<Tensor<T>> {
    let (qs, ks) = (q.shape(), k.shape());
    let ok = |s: &[usize]| s.len() >= 2 && s[s.len() - 1] == cfg.d_k && s[s.len() - 2] == cfg.n;
    if !ok(qs) || !ok(ks) || qs != ks {
        return Err(shape_err(format!(
            "queries {qs:?} and keys {ks:?} must both end in [n = {}, d_k = {}]",
            cfg.n, cfg.d_k
        )));
    }
    let scores = q.matmul(&k.transpose()?)?.scale(cfg.scale());
    scores.activation(&cfg.nonlinearity, cfg.causal, mode)
}
