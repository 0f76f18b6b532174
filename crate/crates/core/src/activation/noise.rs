use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    None,
    Additive,
    Multiplicative,
}

/// Scale of additive noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseReference {
    /// Zero-mean, standard deviation `sigma`.
    #[default]
    Absolute,
    /// Zero-mean, standard deviation `sigma · max_j s_j`.
    SignalMax,
    /// Mean `max_j s_j`, standard deviation `sigma` (literal DC-shift reading).
    DcShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct NoiseSpec<T> {
    #[serde(default)]
    pub mode: NoiseMode,
    #[serde(default = "T::zero")]
    pub sigma: T,
    #[serde(default)]
    pub reference: NoiseReference,
}

impl<T: Scalar> NoiseSpec<T> {
    pub fn none() -> Self {
        Self {
            mode: NoiseMode::None,
            sigma: T::zero(),
            reference: NoiseReference::Absolute,
        }
    }

    pub fn additive(sigma: T) -> Self {
        Self {
            mode: NoiseMode::Additive,
            sigma,
            reference: NoiseReference::Absolute,
        }
    }

    pub fn multiplicative(sigma: T) -> Self {
        Self {
            mode: NoiseMode::Multiplicative,
            sigma,
            reference: NoiseReference::Absolute,
        }
    }

    pub fn with_reference(mut self, reference: NoiseReference) -> Self {
        self.reference = reference;
        self
    }

    pub fn is_active(&self) -> bool {
        self.mode != NoiseMode::None
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= T::zero() && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

impl<T: Scalar> Default for NoiseSpec<T> {
    fn default() -> Self {
        Self::none()
    }
}

#[inline]
fn gaussian<T: Scalar>(rng: &mut dyn RngCore) -> T {
    let g: f64 = StandardNormal.sample(rng);
    T::lit(g)
}

/// Perturbs `s` in place. One draw per element whenever the mode is not
/// `None`, even at `sigma = 0`, so runs at different noise levels share the
/// same random stream.
pub fn apply_noise_in_place<T: Scalar>(
    s: &mut [T],
    spec: &NoiseSpec<T>,
    rng: Option<&mut dyn RngCore>,
) -> Result<()> {
    if !spec.is_active() {
        return Ok(());
    }
    spec.validate()?;
    let rng = rng.ok_or(Error::MissingRng)?;
    let sigma = spec.sigma;
    match spec.mode {
        NoiseMode::None => {}
        NoiseMode::Multiplicative => {
            for v in s.iter_mut() {
                *v = *v * (T::one() + sigma * gaussian::<T>(rng));
            }
        }
        NoiseMode::Additive => {
            let peak = s.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let (mean, std) = match spec.reference {
                NoiseReference::Absolute => (T::zero(), sigma),
                NoiseReference::SignalMax => (T::zero(), sigma * peak),
                NoiseReference::DcShift => (peak, sigma),
            };
            for v in s.iter_mut() {
                *v = *v + mean + std * gaussian::<T>(rng);
            }
        }
    }
    Ok(())
}

pub fn apply_noise<T: Scalar>(
    s: &[T],
    spec: &NoiseSpec<T>,
    rng: Option<&mut dyn RngCore>,
) -> Result<Vec<T>> {
    let mut out = s.to_vec();
    apply_noise_in_place(&mut out, spec, rng)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn multiplicative_keeps_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = apply_noise(
            &[0.0, 0.5, 0.0],
            &NoiseSpec::multiplicative(0.3),
            Some(&mut rng),
        )
        .unwrap();
        assert_eq!(out[0], 0.0);
        assert_eq!(out[2], 0.0);
        assert_ne!(out[1], 0.5);
    }

    #[test]
    fn zero_sigma_is_identity() {
        let s = [0.1, 0.2, 0.9];
        for spec in [
            NoiseSpec::additive(0.0),
            NoiseSpec::multiplicative(0.0),
            NoiseSpec::additive(0.0).with_reference(NoiseReference::SignalMax),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            assert_eq!(apply_noise(&s, &spec, Some(&mut rng)).unwrap(), s.to_vec());
        }
    }

    #[test]
    fn missing_rng_is_an_error() {
        let err = apply_noise(&[1.0f64], &NoiseSpec::additive(0.1), None).unwrap_err();
        assert!(matches!(err, Error::MissingRng));
        assert!(apply_noise(&[1.0f64], &NoiseSpec::none(), None).is_ok());
    }

    #[test]
    fn additive_absolute_std() {
        let n = 1_000_000;
        let s = vec![0.25f64; n];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = apply_noise(&s, &NoiseSpec::additive(0.05), Some(&mut rng)).unwrap();
        let d: Vec<f64> = out.iter().zip(&s).map(|(o, i)| o - i).collect();
        let mean = d.iter().sum::<f64>() / n as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        assert!((0.0499..=0.0501).contains(&std), "std {std}");
    }

    #[test]
    fn signal_max_reference_scales_sigma() {
        let n = 200_000;
        let mut s = vec![0.0f64; n];
        s[0] = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = NoiseSpec::additive(0.05).with_reference(NoiseReference::SignalMax);
        let out = apply_noise(&s, &spec, Some(&mut rng)).unwrap();
        let std = (out[1..].iter().map(|x| x * x).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((std - 0.1).abs() < 0.001, "std {std}");
    }

    #[test]
    fn same_seed_same_draws() {
        let s = [0.3f64; 16];
        let spec = NoiseSpec::additive(0.1);
        let a = apply_noise(&s, &spec, Some(&mut ChaCha8Rng::seed_from_u64(9))).unwrap();
        let b = apply_noise(&s, &spec, Some(&mut ChaCha8Rng::seed_from_u64(9))).unwrap();
        assert_eq!(a, b);
    }
}
