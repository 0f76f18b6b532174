//! Softmax surrogate built from a rising modulator slope (numerator) and a
//! falling slope driven by the accumulated sum (normalization).

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::activation::noise::{apply_noise_in_place, NoiseSpec};
use crate::activation::norm::NormModel;
use crate::activation::quant::QuantSpec;
use crate::activation::slope::SlopeMap;
use crate::error::{Error, Result};
use crate::mzm::{SineTransferModel, SlopeSegment};
use crate::scalar::Scalar;

/// Numerator stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Scalar")]
pub enum ExpStage<T> {
    /// `e^w`.
    Exact,
    Mzm(SlopeMap<T>),
}

impl<T: Scalar> ExpStage<T> {
    #[inline]
    pub fn eval(&self, w: T) -> T {
        match self {
            ExpStage::Exact => w.exp(),
            ExpStage::Mzm(m) => m.eval(w),
        }
    }

    #[inline]
    pub fn deriv(&self, w: T) -> T {
        match self {
            ExpStage::Exact => w.exp(),
            ExpStage::Mzm(m) => m.deriv(w),
        }
    }

    pub fn peak(&self, x_max: T) -> T {
        match self {
            ExpStage::Exact => x_max.exp(),
            ExpStage::Mzm(_) => T::one(),
        }
    }
}

/// Normalization stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Scalar")]
pub enum Normalizer<T> {
    /// `1/z`.
    Reciprocal,
    Mzm(NormModel<T>),
}

impl<T: Scalar> Normalizer<T> {
    #[inline]
    pub fn eval(&self, z: T) -> T {
        match self {
            Normalizer::Reciprocal => z.recip(),
            Normalizer::Mzm(n) => n.eval(z),
        }
    }

    #[inline]
    pub fn deriv(&self, z: T) -> T {
        match self {
            Normalizer::Reciprocal => -(z * z).recip(),
            Normalizer::Mzm(n) => n.deriv(z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct OptmaxParams<T> {
    pub x_min: T,
    pub x_max: T,
    pub z_min: T,
    pub z_max: T,
    pub f_exp: ExpStage<T>,
    pub norm: Normalizer<T>,
    #[serde(default)]
    pub q_in: QuantSpec<T>,
    #[serde(default)]
    pub q_out: QuantSpec<T>,
    #[serde(default)]
    pub noise: NoiseSpec<T>,
}

/// Intermediate values of one row, shared by forward and backward passes.
struct Row<T> {
    e: Vec<T>,
    z: T,
    n_z: T,
}

impl<T: Scalar> OptmaxParams<T> {
    /// Exact exponential, exact reciprocal, no clipping: reduces to Softmax.
    pub fn ideal() -> Self {
        Self {
            x_min: T::neg_infinity(),
            x_max: T::infinity(),
            z_min: T::min_positive_value(),
            z_max: T::infinity(),
            f_exp: ExpStage::Exact,
            norm: Normalizer::Reciprocal,
            q_in: QuantSpec::disabled(),
            q_out: QuantSpec::disabled(),
            noise: NoiseSpec::none(),
        }
    }

    /// Maps `[x_min, x_max]` onto the device's rising slope and
    /// `[z_min, z_max]` onto its falling slope, fitting `α`, `β` against
    /// `1/z` on `grid_points` points.
    pub fn calibrated(
        device: &SineTransferModel<T>,
        (x_min, x_max): (T, T),
        (z_min, z_max): (T, T),
        grid_points: usize,
    ) -> Result<Self> {
        let f_exp = SlopeMap::new(*device, SlopeSegment::Rising, x_min, x_max)?;
        if !(z_min > T::zero()) || !(z_min < z_max) {
            return Err(Error::DegenerateDomain {
                z_min: z_min.to_f64_lossy(),
                z_max: z_max.to_f64_lossy(),
            });
        }
        let f_rec = SlopeMap::new(*device, SlopeSegment::Falling, z_min, z_max)?;
        let norm = NormModel::calibrate(f_rec, grid_points)?;
        let p = Self {
            x_min,
            x_max,
            z_min,
            z_max,
            f_exp: ExpStage::Mzm(f_exp),
            norm: Normalizer::Mzm(norm),
            q_in: QuantSpec::disabled(),
            q_out: QuantSpec::disabled(),
            noise: NoiseSpec::none(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min < self.x_max) {
            return Err(Error::InvalidParameter(format!(
                "optmax clip range requires x_min < x_max, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if !(self.z_min > T::zero() && self.z_min < self.z_max) {
            return Err(Error::DegenerateDomain {
                z_min: self.z_min.to_f64_lossy(),
                z_max: self.z_max.to_f64_lossy(),
            });
        }
        self.noise.validate()
    }

    /// Upper bound on any output before noise.
    pub fn output_bound(&self) -> T {
        let n_max = match &self.norm {
            Normalizer::Reciprocal => self.z_min.recip(),
            Normalizer::Mzm(n) => n.alpha,
        };
        n_max * self.f_exp.peak(self.x_max)
    }

    #[inline]
    fn clip(&self, x: T) -> T {
        x.max(self.x_min).min(self.x_max)
    }

    #[inline]
    fn clip_grad(&self, x: T) -> T {
        if x >= self.x_min && x <= self.x_max {
            T::one()
        } else {
            T::zero()
        }
    }

    fn row(&self, x: &[T], smooth: bool) -> Row<T> {
        let e: Vec<T> = x
            .iter()
            .map(|&v| {
                let u = self.clip(v);
                let w = if smooth {
                    self.q_in.surrogate(u)
                } else {
                    self.q_in.quantize(u)
                };
                self.f_exp.eval(w)
            })
            .collect();
        let z: T = e.iter().copied().sum();
        let n_z = self.norm.eval(z.max(self.z_min).min(self.z_max));
        Row { e, z, n_z }
    }

    /// Forward model over the first `valid` entries; the rest are masked to
    /// zero and excluded from the accumulated sum.
    pub fn forward_masked(
        &self,
        x: &[T],
        valid: usize,
        rng: Option<&mut dyn RngCore>,
    ) -> Result<Vec<T>> {
        if x.is_empty() {
            return Err(Error::EmptyInput);
        }
        let valid = valid.min(x.len());
        let row = self.row(&x[..valid], false);
        let mut s: Vec<T> = row.e.iter().map(|&e| row.n_z * e).collect();
        apply_noise_in_place(&mut s, &self.noise, rng)?;
        let mut out: Vec<T> = s.into_iter().map(|v| self.q_out.quantize(v)).collect();
        out.resize(x.len(), T::zero());
        Ok(out)
    }

    pub fn forward(&self, x: &[T], rng: Option<&mut dyn RngCore>) -> Result<Vec<T>> {
        self.forward_masked(x, x.len(), rng)
    }

    /// Noise-free forward pass with each quantizer replaced by clipping to
    /// its range. This is the function [`Self::vjp`] differentiates.
    pub fn surrogate(&self, x: &[T], valid: usize) -> Vec<T> {
        let valid = valid.min(x.len());
        let row = self.row(&x[..valid], true);
        let mut out: Vec<T> = row
            .e
            .iter()
            .map(|&e| self.q_out.surrogate(row.n_z * e))
            .collect();
        out.resize(x.len(), T::zero());
        out
    }

    pub fn vjp(&self, x: &[T], valid: usize, cot: &[T]) -> Vec<T> {
        let valid = valid.min(x.len());
        let row = self.row(&x[..valid], true);
        let g: Vec<T> = (0..valid)
            .map(|i| cot[i] * self.q_out.ste(row.n_z * row.e[i]))
            .collect();
        let in_range = row.z >= self.z_min && row.z <= self.z_max;
        let dn = if in_range {
            self.norm.deriv(row.z)
        } else {
            T::zero()
        };
        let ge: T = g.iter().zip(&row.e).map(|(&gi, &ei)| gi * ei).sum();
        let mut out = vec![T::zero(); x.len()];
        for k in 0..valid {
            let u = self.clip(x[k]);
            let w = self.q_in.surrogate(u);
            let chain = self.f_exp.deriv(w) * self.q_in.ste(u) * self.clip_grad(x[k]);
            out[k] = chain * (row.n_z * g[k] + dn * ge);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::reference::softmax_ref;
    use crate::mzm::VoltageWindow;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn device() -> SineTransferModel<f64> {
        let w = VoltageWindow::new(0.0, 5.73).unwrap();
        SineTransferModel::new(0.5, PI / 5.73, -PI / 2.0, w).unwrap()
    }

    #[test]
    fn ideal_limit_is_softmax() {
        let p = OptmaxParams::<f64>::ideal();
        let out = p.forward(&[1.0, 2.0, 3.0], None).unwrap();
        let s = softmax_ref(&[1.0, 2.0, 3.0]).unwrap();
        for (a, b) in out.iter().zip(&s) {
            assert!((a - b).abs() < 1e-12);
        }
        let c = p.forward(&[0.7; 5], None).unwrap();
        assert!(c.iter().all(|v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn calibrated_outputs_nonnegative_and_rank_consistent() {
        let p = OptmaxParams::calibrated(&device(), (0.0, 4.0), (6.0, 14.0), 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..40);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..5.0)).collect();
            let y = p.forward(&x, None).unwrap();
            assert!(y
                .iter()
                .all(|v| *v >= 0.0 && *v <= p.output_bound() + 1e-15));
            for i in 0..n {
                for j in 0..n {
                    if x[i] <= x[j] {
                        assert!(y[i] <= y[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn masked_tail_is_zero_and_excluded() {
        let p = OptmaxParams::<f64>::ideal();
        let y = p.forward_masked(&[1.0, 2.0, 50.0], 2, None).unwrap();
        let s = softmax_ref(&[1.0, 2.0]).unwrap();
        assert_eq!(y[2], 0.0);
        assert!((y[0] - s[0]).abs() < 1e-15 && (y[1] - s[1]).abs() < 1e-15);
    }

    #[test]
    fn empty_input_and_missing_rng() {
        let p = OptmaxParams::<f64>::ideal();
        assert!(matches!(p.forward(&[], None), Err(Error::EmptyInput)));
        let mut noisy = p;
        noisy.noise = NoiseSpec::additive(0.1);
        assert!(matches!(
            noisy.forward(&[1.0], None),
            Err(Error::MissingRng)
        ));
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let p = OptmaxParams::calibrated(&device(), (0.0, 4.0), (1.5, 6.5), 256).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(0.2..3.8)).collect();
        let cot: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = p.vjp(&x, 8, &cot);
        let h = 1e-6;
        for k in 0..8 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let fp: f64 = p
                .surrogate(&xp, 8)
                .iter()
                .zip(&cot)
                .map(|(a, b)| a * b)
                .sum();
            let fm: f64 = p
                .surrogate(&xm, 8)
                .iter()
                .zip(&cot)
                .map(|(a, b)| a * b)
                .sum();
            let fd = (fp - fm) / (2.0 * h);
            assert!(
                (fd - g[k]).abs() < 1e-7 * fd.abs().max(1.0),
                "{k}: {fd} vs {}",
                g[k]
            );
        }
    }
}
