use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantMode {
    /// Truncate to the lower edge of the bin; the zero bin is `[lo, lo + step)`.
    #[default]
    Floor,
    /// Round to the nearest bin edge.
    Nearest,
}

/// Uniform DAC/ADC quantizer with `2^bits` bins over `[lo, hi]`.
/// `bits = None` disables quantization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct QuantSpec<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<u32>,
    pub lo: T,
    pub hi: T,
    #[serde(default)]
    pub mode: QuantMode,
}

impl<T: Scalar> QuantSpec<T> {
    pub fn disabled() -> Self {
        Self {
            bits: None,
            lo: T::zero(),
            hi: T::one(),
            mode: QuantMode::Floor,
        }
    }

    pub fn new(bits: u32, lo: T, hi: T) -> Result<Self> {
        if bits == 0 || bits > 52 {
            return Err(Error::InvalidParameter(format!(
                "quantizer bits must be in 1..=52, got {bits}"
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "quantizer range requires finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            bits: Some(bits),
            lo,
            hi,
            mode: QuantMode::Floor,
        })
    }

    pub fn with_mode(mut self, mode: QuantMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn is_enabled(&self) -> bool {
        self.bits.is_some()
    }

    pub fn levels(&self) -> Option<u64> {
        self.bits.map(|b| 1u64 << b)
    }

    pub fn step(&self) -> Option<T> {
        self.levels()
            .map(|n| (self.hi - self.lo) / T::from_u64(n).expect("level count"))
    }

    #[inline]
    pub fn quantize(&self, v: T) -> T {
        let Some(levels) = self.levels() else {
            return v;
        };
        let step = (self.hi - self.lo) / T::from_u64(levels).expect("level count");
        let top = T::from_u64(levels - 1).expect("level count");
        let clipped = v.max(self.lo).min(self.hi);
        let pos = (clipped - self.lo) / step;
        let idx = match self.mode {
            QuantMode::Floor => pos.floor(),
            QuantMode::Nearest => pos.round(),
        };
        self.lo + idx.min(top).max(T::zero()) * step
    }

    /// Smooth stand-in used for differentiation: clipping to the range
    /// (identity when disabled).
    #[inline]
    pub fn surrogate(&self, v: T) -> T {
        if self.is_enabled() {
            v.max(self.lo).min(self.hi)
        } else {
            v
        }
    }

    /// Straight-through gradient factor: 1 inside `[lo, hi]`, 0 outside.
    #[inline]
    pub fn ste(&self, v: T) -> T {
        if !self.is_enabled() || (v >= self.lo && v <= self.hi) {
            T::one()
        } else {
            T::zero()
        }
    }
}

impl<T: Scalar> Default for QuantSpec<T> {
    fn default() -> Self {
        Self::disabled()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_bit_zero_threshold() {
        let q = QuantSpec::new(4, 0.0, 1.0).unwrap();
        assert_eq!(q.quantize(0.03), 0.0);
        assert_eq!(q.quantize(0.0625), 0.0625);
        assert_eq!(q.quantize(0.0624999), 0.0);
        assert_eq!(q.quantize(2.0), 0.9375);
        assert_eq!(q.quantize(-1.0), 0.0);
    }

    #[test]
    fn nearest_mode_halves_threshold() {
        let q = QuantSpec::new(4, 0.0, 1.0)
            .unwrap()
            .with_mode(QuantMode::Nearest);
        assert_eq!(q.quantize(0.03), 0.0);
        assert_eq!(q.quantize(0.032), 0.0625);
    }

    #[test]
    fn disabled_is_identity() {
        let q = QuantSpec::<f64>::disabled();
        assert_eq!(q.quantize(0.7313), 0.7313);
        assert_eq!(q.ste(100.0), 1.0);
    }

    #[test]
    fn ste_zero_outside_range() {
        let q = QuantSpec::new(8, -1.0, 1.0).unwrap();
        assert_eq!(q.ste(0.5), 1.0);
        assert_eq!(q.ste(1.5), 0.0);
        assert_eq!(q.surrogate(1.5), 1.0);
    }

    proptest! {
        #[test]
        fn at_most_two_pow_bits_values(bits in 1u32..7, vals in prop::collection::vec(-2.0f64..3.0, 1..400)) {
            let q = QuantSpec::new(bits, -1.0, 2.0).unwrap();
            let mut out: Vec<f64> = vals.iter().map(|&v| q.quantize(v)).collect();
            out.sort_by(|a, b| a.partial_cmp(b).unwrap());
            out.dedup();
            prop_assert!(out.len() as u64 <= 1u64 << bits);
            prop_assert!(out.iter().all(|v| *v >= -1.0 && *v < 2.0));
        }

        #[test]
        fn quantize_is_monotone(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let q = QuantSpec::new(5, -1.0, 1.0).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(q.quantize(lo) <= q.quantize(hi));
        }
    }
}
