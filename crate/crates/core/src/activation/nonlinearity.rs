//! Uniform interface over the four attention nonlinearities.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::activation::noise::{apply_noise_in_place, NoiseSpec};
use crate::activation::optmax::OptmaxParams;
use crate::activation::optmoid::OptmoidParams;
use crate::activation::quant::QuantSpec;
use crate::activation::reference::logistic;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Softmax,
    Sigmoid,
    Optmax,
    Optmoid,
}

impl ActivationKind {
    /// Row-wise kinds couple all entries of a row; the others are elementwise.
    pub fn is_rowwise(self) -> bool {
        matches!(self, ActivationKind::Softmax | ActivationKind::Optmax)
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Softmax => "softmax",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Optmax => "optmax",
            ActivationKind::Optmoid => "optmoid",
        }
    }
}

impl std::fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "softmax" => Ok(ActivationKind::Softmax),
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "optmax" => Ok(ActivationKind::Optmax),
            "optmoid" => Ok(ActivationKind::Optmoid),
            other => Err(Error::InvalidParameter(format!(
                "unknown activation '{other}'"
            ))),
        }
    }
}

/// Exact digital nonlinearity with the same quantizer and noise hooks as the
/// optical ones. `bias` is only used by the sigmoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct DigitalParams<T> {
    #[serde(default = "T::zero")]
    pub bias: T,
    #[serde(default)]
    pub q_in: QuantSpec<T>,
    #[serde(default)]
    pub q_out: QuantSpec<T>,
    #[serde(default)]
    pub noise: NoiseSpec<T>,
}

impl<T: Scalar> Default for DigitalParams<T> {
    fn default() -> Self {
        Self {
            bias: T::zero(),
            q_in: QuantSpec::disabled(),
            q_out: QuantSpec::disabled(),
            noise: NoiseSpec::none(),
        }
    }
}

impl<T: Scalar> DigitalParams<T> {
    pub fn with_bias(bias: T) -> Self {
        Self {
            bias,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Scalar")]
pub enum Nonlinearity<T> {
    Softmax(DigitalParams<T>),
    Sigmoid(DigitalParams<T>),
    Optmax(OptmaxParams<T>),
    Optmoid(OptmoidParams<T>),
}

fn finish<T: Scalar>(
    mut s: Vec<T>,
    len: usize,
    noise: &NoiseSpec<T>,
    q_out: &QuantSpec<T>,
    rng: Option<&mut dyn RngCore>,
) -> Result<Vec<T>> {
    apply_noise_in_place(&mut s, noise, rng)?;
    let mut out: Vec<T> = s.into_iter().map(|v| q_out.quantize(v)).collect();
    out.resize(len, T::zero());
    Ok(out)
}

fn softmax_in_place<T: Scalar>(w: &mut [T]) {
    let m = w.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let mut total = T::zero();
    for v in w.iter_mut() {
        *v = (*v - m).exp();
        total = total + *v;
    }
    for v in w.iter_mut() {
        *v = *v / total;
    }
}

impl<T: Scalar> Nonlinearity<T> {
    pub fn softmax() -> Self {
        Nonlinearity::Softmax(DigitalParams::default())
    }

    pub fn sigmoid(bias: T) -> Self {
        Nonlinearity::Sigmoid(DigitalParams::with_bias(bias))
    }

    pub fn kind(&self) -> ActivationKind {
        match self {
            Nonlinearity::Softmax(_) => ActivationKind::Softmax,
            Nonlinearity::Sigmoid(_) => ActivationKind::Sigmoid,
            Nonlinearity::Optmax(_) => ActivationKind::Optmax,
            Nonlinearity::Optmoid(_) => ActivationKind::Optmoid,
        }
    }

    pub fn q_in(&self) -> &QuantSpec<T> {
        match self {
            Nonlinearity::Softmax(p) | Nonlinearity::Sigmoid(p) => &p.q_in,
            Nonlinearity::Optmax(p) => &p.q_in,
            Nonlinearity::Optmoid(p) => &p.q_in,
        }
    }

    pub fn q_out(&self) -> &QuantSpec<T> {
        match self {
            Nonlinearity::Softmax(p) | Nonlinearity::Sigmoid(p) => &p.q_out,
            Nonlinearity::Optmax(p) => &p.q_out,
            Nonlinearity::Optmoid(p) => &p.q_out,
        }
    }

    pub fn noise(&self) -> &NoiseSpec<T> {
        match self {
            Nonlinearity::Softmax(p) | Nonlinearity::Sigmoid(p) => &p.noise,
            Nonlinearity::Optmax(p) => &p.noise,
            Nonlinearity::Optmoid(p) => &p.noise,
        }
    }

    pub fn set_q_in(&mut self, q: QuantSpec<T>) {
        match self {
            Nonlinearity::Softmax(p) | Nonlinearity::Sigmoid(p) => p.q_in = q,
            Nonlinearity::Optmax(p) => p.q_in = q,
            Nonlinearity::Optmoid(p) => p.q_in = q,
        }
    }

    pub fn set_q_out(&mut self, q: QuantSpec<T>) {
        match self {
            Nonlinearity::Softmax(p) | Nonlinearity::Sigmoid(p) => p.q_out = q,
            Nonlinearity::Optmax(p) => p.q_out = q,
            Nonlinearity::Optmoid(p) => p.q_out = q,
        }
    }

    pub fn set_noise(&mut self, n: NoiseSpec<T>) {
        match self {
            Nonlinearity::Softmax(p) | Nonlinearity::Sigmoid(p) => p.noise = n,
            Nonlinearity::Optmax(p) => p.noise = n,
            Nonlinearity::Optmoid(p) => p.noise = n,
        }
    }

    /// Input quantization range: the clip range for the optical kinds,
    /// `None` for the digital ones (their inputs are unbounded).
    pub fn input_range(&self) -> Option<(T, T)> {
        match self {
            Nonlinearity::Softmax(_) | Nonlinearity::Sigmoid(_) => None,
            Nonlinearity::Optmax(p) => Some((p.x_min, p.x_max)),
            Nonlinearity::Optmoid(p) => Some(p.clip_range()),
        }
    }

    /// Quantizes outputs on `[0, 1]` and, for the optical kinds, inputs over
    /// their clip range. `None` disables both.
    pub fn with_bits(mut self, bits: Option<u32>) -> Result<Self> {
        match bits {
            None => {
                self.set_q_in(QuantSpec::disabled());
                self.set_q_out(QuantSpec::disabled());
            }
            Some(k) => {
                self.set_q_out(QuantSpec::new(k, T::zero(), T::one())?);
                if let Some((lo, hi)) = self.input_range() {
                    if lo.is_finite() && hi.is_finite() {
                        self.set_q_in(QuantSpec::new(k, lo, hi)?);
                    }
                }
            }
        }
        Ok(self)
    }

    pub fn with_noise(mut self, n: NoiseSpec<T>) -> Self {
        self.set_noise(n);
        self
    }

    /// Hardware forward model over the first `valid` entries of a row;
    /// the remaining entries are masked to zero.
    pub fn forward_row(
        &self,
        x: &[T],
        valid: usize,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<Vec<T>> {
        if x.is_empty() {
            return Err(Error::EmptyInput);
        }
        let valid = valid.min(x.len());
        match self {
            Nonlinearity::Softmax(p) => {
                let mut w: Vec<T> = x[..valid].iter().map(|&v| p.q_in.quantize(v)).collect();
                softmax_in_place(&mut w);
                finish(w, x.len(), &p.noise, &p.q_out, rng)
            }
            Nonlinearity::Sigmoid(p) => {
                let w: Vec<T> = x[..valid]
                    .iter()
                    .map(|&v| logistic(p.q_in.quantize(v) + p.bias))
                    .collect();
                finish(w, x.len(), &p.noise, &p.q_out, rng)
            }
            Nonlinearity::Optmax(p) => p.forward_masked(x, valid, rng),
            Nonlinearity::Optmoid(p) => p.forward_masked(x, valid, rng),
        }
    }

    /// Smooth, noise-free version of [`Self::forward_row`] with quantizers
    /// replaced by clipping.
    pub fn surrogate_row(&self, x: &[T], valid: usize) -> Vec<T> {
        let valid = valid.min(x.len());
        let mut out: Vec<T> = match self {
            Nonlinearity::Softmax(p) => {
                let mut w: Vec<T> = x[..valid].iter().map(|&v| p.q_in.surrogate(v)).collect();
                softmax_in_place(&mut w);
                w.into_iter().map(|v| p.q_out.surrogate(v)).collect()
            }
            Nonlinearity::Sigmoid(p) => x[..valid]
                .iter()
                .map(|&v| p.q_out.surrogate(logistic(p.q_in.surrogate(v) + p.bias)))
                .collect(),
            Nonlinearity::Optmax(p) => return p.surrogate(x, valid),
            Nonlinearity::Optmoid(p) => return p.surrogate(x, valid),
        };
        out.resize(x.len(), T::zero());
        out
    }

    /// Reverse-mode product `cotᵀ · J` of the surrogate at `x`. Quantizers use
    /// the straight-through estimator.
    pub fn vjp_row(&self, x: &[T], valid: usize, cot: &[T]) -> Vec<T> {
        let valid = valid.min(x.len());
        let mut out = vec![T::zero(); x.len()];
        match self {
            Nonlinearity::Softmax(p) => {
                let mut s: Vec<T> = x[..valid].iter().map(|&v| p.q_in.surrogate(v)).collect();
                softmax_in_place(&mut s);
                let g: Vec<T> = (0..valid).map(|i| cot[i] * p.q_out.ste(s[i])).collect();
                let dot: T = g.iter().zip(&s).map(|(&a, &b)| a * b).sum();
                for i in 0..valid {
                    out[i] = s[i] * (g[i] - dot) * p.q_in.ste(x[i]);
                }
            }
            Nonlinearity::Sigmoid(p) => {
                for i in 0..valid {
                    let s = logistic(p.q_in.surrogate(x[i]) + p.bias);
                    out[i] = cot[i] * p.q_out.ste(s) * s * (T::one() - s) * p.q_in.ste(x[i]);
                }
            }
            Nonlinearity::Optmax(p) => return p.vjp(x, valid, cot),
            Nonlinearity::Optmoid(p) => return p.vjp(x, valid, cot),
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Nonlinearity::Softmax(p) | Nonlinearity::Sigmoid(p) => p.noise.validate(),
            Nonlinearity::Optmax(p) => p.validate(),
            Nonlinearity::Optmoid(p) => p.noise.validate(),
        }
    }
}

/// Dense Jacobian `J[i][k] = ∂y_i/∂x_k` of the surrogate, assembled from
/// reverse-mode products.
pub fn activation_jacobian<T: Scalar>(nl: &Nonlinearity<T>, x: &[T]) -> Vec<Vec<T>> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut e = vec![T::zero(); n];
            e[i] = T::one();
            nl.vjp_row(x, n, &e)
        })
        .collect()
}

/// Returns the vector-Jacobian product function of the surrogate at `x`.
pub fn activation_grad<'a, T: Scalar>(
    nl: &'a Nonlinearity<T>,
    x: &'a [T],
) -> impl Fn(&[T]) -> Vec<T> + 'a {
    move |cot| nl.vjp_row(x, x.len(), cot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::reference::{sigmoid_ref, softmax_ref};

    #[test]
    fn softmax_jacobian_closed_form() {
        let nl = Nonlinearity::<f64>::softmax();
        let x = [1.0, 2.0, 3.0];
        let s = softmax_ref(&x).unwrap();
        let j = activation_jacobian(&nl, &x);
        for i in 0..3 {
            for k in 0..3 {
                let want = if i == k {
                    s[i] - s[i] * s[k]
                } else {
                    -s[i] * s[k]
                };
                assert!((j[i][k] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn digital_forward_matches_references() {
        let x = [0.3f64, -1.0, 2.5];
        let y = Nonlinearity::softmax().forward_row(&x, 3, None).unwrap();
        for (a, b) in y.iter().zip(softmax_ref(&x).unwrap()) {
            assert!((a - b).abs() < 1e-15);
        }
        let y = Nonlinearity::sigmoid(-1.2)
            .forward_row(&x, 3, None)
            .unwrap();
        assert_eq!(y, sigmoid_ref(&x, -1.2));
    }

    #[test]
    fn masked_entries_zero_and_no_gradient() {
        let nl = Nonlinearity::<f64>::sigmoid(0.0);
        let y = nl.forward_row(&[1.0, 2.0, 3.0], 1, None).unwrap();
        assert_eq!(&y[1..], &[0.0, 0.0]);
        let g = nl.vjp_row(&[1.0, 2.0, 3.0], 1, &[1.0, 1.0, 1.0]);
        assert_eq!(&g[1..], &[0.0, 0.0]);
    }

    #[test]
    fn kind_parses() {
        assert_eq!(
            "OptMax".parse::<ActivationKind>().unwrap(),
            ActivationKind::Optmax
        );
        assert!("relu".parse::<ActivationKind>().is_err());
    }
}
