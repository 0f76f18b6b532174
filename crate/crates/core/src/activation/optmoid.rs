//! Elementwise sigmoid surrogate using the modulator's full min-to-max swing.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::activation::noise::{apply_noise_in_place, NoiseSpec};
use crate::activation::quant::QuantSpec;
use crate::activation::reference::logistic;
use crate::activation::slope::SlopeMap;
use crate::error::{Error, Result};
use crate::mzm::{SineTransferModel, SlopeSegment};
use crate::scalar::Scalar;

/// Grid in the biased domain `u = x + b` over which the clip range is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct SigmoidGrid<T> {
    pub lo: T,
    pub hi: T,
    pub points: usize,
}

impl<T: Scalar> Default for SigmoidGrid<T> {
    fn default() -> Self {
        Self {
            lo: T::lit(-8.0),
            hi: T::lit(8.0),
            points: 256,
        }
    }
}

impl<T: Scalar> SigmoidGrid<T> {
    pub fn nodes(&self) -> impl Iterator<Item = T> + '_ {
        let last = T::from_usize_lossy(self.points.max(2) - 1);
        (0..self.points).map(move |i| self.lo + (self.hi - self.lo) * T::from_usize_lossy(i) / last)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct OptmoidParams<T> {
    pub bias: T,
    /// Full-swing map over the clip range `[x_min, x_max]` of `x + bias`.
    pub f_sig: SlopeMap<T>,
    /// Euclidean norm of `f_sig − sigmoid` on the calibration grid.
    #[serde(default = "T::zero")]
    pub fit_residual: T,
    #[serde(default)]
    pub q_in: QuantSpec<T>,
    #[serde(default)]
    pub q_out: QuantSpec<T>,
    #[serde(default)]
    pub noise: NoiseSpec<T>,
}

impl<T: Scalar> OptmoidParams<T> {
    pub fn with_clip(device: &SineTransferModel<T>, bias: T, x_min: T, x_max: T) -> Result<Self> {
        Ok(Self {
            bias,
            f_sig: SlopeMap::new(*device, SlopeSegment::FullSwing, x_min, x_max)?,
            fit_residual: T::zero(),
            q_in: QuantSpec::disabled(),
            q_out: QuantSpec::disabled(),
            noise: NoiseSpec::none(),
        })
    }

    /// Chooses a symmetric clip range `[-h, h]` minimizing the squared
    /// deviation from the logistic function on `grid`.
    pub fn calibrate(
        device: &SineTransferModel<T>,
        bias: T,
        grid: &SigmoidGrid<T>,
    ) -> Result<Self> {
        if grid.points < 2 || !(grid.lo < grid.hi) {
            return Err(Error::InvalidParameter(
                "sigmoid calibration grid is empty".into(),
            ));
        }
        let nodes: Vec<T> = grid.nodes().collect();
        let cost = |h: T| -> Result<T> {
            let m = SlopeMap::new(*device, SlopeSegment::FullSwing, -h, h)?;
            Ok(nodes
                .iter()
                .map(|&u| {
                    let r = m.eval(u) - logistic(u);
                    r * r
                })
                .sum())
        };

        let reach = grid.lo.abs().max(grid.hi.abs());
        let (lo, hi) = (reach * T::lit(0.01), reach * T::lit(2.0));
        let scan = 200usize;
        let mut best = (T::infinity(), lo);
        for i in 0..=scan {
            let h = lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(scan);
            let c = cost(h)?;
            if c < best.0 {
                best = (c, h);
            }
        }
        // Golden-section refinement around the best scan point.
        let step = (hi - lo) / T::from_usize_lossy(scan);
        let (mut a, mut b) = ((best.1 - step).max(lo), (best.1 + step).min(hi));
        let g = T::lit(0.618_033_988_749_894_9);
        let mut c1 = b - g * (b - a);
        let mut c2 = a + g * (b - a);
        let (mut f1, mut f2) = (cost(c1)?, cost(c2)?);
        for _ in 0..100 {
            if f1 < f2 {
                b = c2;
                c2 = c1;
                f2 = f1;
                c1 = b - g * (b - a);
                f1 = cost(c1)?;
            } else {
                a = c1;
                c1 = c2;
                f1 = f2;
                c2 = a + g * (b - a);
                f2 = cost(c2)?;
            }
        }
        let h = if f1 < f2 { c1 } else { c2 };
        let h = if cost(h)? <= best.0 { h } else { best.1 };
        let mut p = Self::with_clip(device, bias, -h, h)?;
        p.fit_residual = cost(h)?.sqrt();
        Ok(p)
    }

    pub fn clip_range(&self) -> (T, T) {
        self.f_sig.domain()
    }

    #[inline]
    fn clip(&self, u: T) -> T {
        let (lo, hi) = self.f_sig.domain();
        u.max(lo).min(hi)
    }

    #[inline]
    fn clip_grad(&self, u: T) -> T {
        let (lo, hi) = self.f_sig.domain();
        if u >= lo && u <= hi {
            T::one()
        } else {
            T::zero()
        }
    }

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
        let mut s: Vec<T> = x[..valid]
            .iter()
            .map(|&v| {
                self.f_sig
                    .eval(self.q_in.quantize(self.clip(v + self.bias)))
            })
            .collect();
        apply_noise_in_place(&mut s, &self.noise, rng)?;
        let mut out: Vec<T> = s.into_iter().map(|v| self.q_out.quantize(v)).collect();
        out.resize(x.len(), T::zero());
        Ok(out)
    }

    pub fn forward(&self, x: &[T], rng: Option<&mut dyn RngCore>) -> Result<Vec<T>> {
        self.forward_masked(x, x.len(), rng)
    }

    pub fn surrogate(&self, x: &[T], valid: usize) -> Vec<T> {
        let valid = valid.min(x.len());
        let mut out: Vec<T> = x[..valid]
            .iter()
            .map(|&v| {
                self.q_out.surrogate(
                    self.f_sig
                        .eval(self.q_in.surrogate(self.clip(v + self.bias))),
                )
            })
            .collect();
        out.resize(x.len(), T::zero());
        out
    }

    pub fn vjp(&self, x: &[T], valid: usize, cot: &[T]) -> Vec<T> {
        let valid = valid.min(x.len());
        let mut out = vec![T::zero(); x.len()];
        for k in 0..valid {
            let u = x[k] + self.bias;
            let c = self.clip(u);
            let w = self.q_in.surrogate(c);
            let s = self.f_sig.eval(w);
            out[k] = cot[k]
                * self.q_out.ste(s)
                * self.f_sig.deriv(w)
                * self.q_in.ste(c)
                * self.clip_grad(u);
        }
        out
    }
}
