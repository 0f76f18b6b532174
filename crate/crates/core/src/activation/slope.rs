use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mzm::{AffineEncoder, SineTransferModel, SlopeSegment, VoltageWindow};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct SlopeMapRepr<T> {
    model: SineTransferModel<T>,
    segment: SlopeSegment,
    d_min: T,
    d_max: T,
}

/// A modulator slope segment addressed from an activation domain
/// `[d_min, d_max]` and rescaled so the segment spans `[0, 1]`.
///
/// Rising and full-swing maps go `0 → 1` across the domain, the falling map
/// goes `1 → 0`. Endpoints are exact and the output is clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "SlopeMapRepr<T>",
    into = "SlopeMapRepr<T>",
    bound = "T: Scalar"
)]
pub struct SlopeMap<T> {
    model: SineTransferModel<T>,
    segment: SlopeSegment,
    d_min: T,
    d_max: T,
    window: VoltageWindow<T>,
    encoder: AffineEncoder<T>,
    t_floor: T,
    t_span: T,
}

impl<T: Scalar> TryFrom<SlopeMapRepr<T>> for SlopeMap<T> {
    type Error = Error;

    fn try_from(r: SlopeMapRepr<T>) -> Result<Self> {
        SlopeMap::new(r.model, r.segment, r.d_min, r.d_max)
    }
}

impl<T: Scalar> From<SlopeMap<T>> for SlopeMapRepr<T> {
    fn from(m: SlopeMap<T>) -> Self {
        SlopeMapRepr {
            model: m.model,
            segment: m.segment,
            d_min: m.d_min,
            d_max: m.d_max,
        }
    }
}

impl<T: Scalar> SlopeMap<T> {
    pub fn new(
        model: SineTransferModel<T>,
        segment: SlopeSegment,
        d_min: T,
        d_max: T,
    ) -> Result<Self> {
        let window = model.slope_window(segment)?;
        let encoder = AffineEncoder::new(d_min, d_max, window)?;
        let t0 = model.transmission(window.v_min);
        let t1 = model.transmission(window.v_max);
        let t_span = (t1 - t0).abs();
        if !(t_span > T::zero()) {
            return Err(Error::InvalidParameter(
                "slope segment has no transmission swing".into(),
            ));
        }
        Ok(Self {
            model,
            segment,
            d_min,
            d_max,
            window,
            encoder,
            t_floor: t0.min(t1),
            t_span,
        })
    }

    pub fn model(&self) -> &SineTransferModel<T> {
        &self.model
    }

    pub fn segment(&self) -> SlopeSegment {
        self.segment
    }

    pub fn domain(&self) -> (T, T) {
        (self.d_min, self.d_max)
    }

    pub fn window(&self) -> VoltageWindow<T> {
        self.window
    }

    pub fn encoder(&self) -> &AffineEncoder<T> {
        &self.encoder
    }

    fn falling(&self) -> bool {
        self.segment == SlopeSegment::Falling
    }

    #[inline]
    pub fn eval(&self, w: T) -> T {
        let (at_min, at_max) = if self.falling() {
            (T::one(), T::zero())
        } else {
            (T::zero(), T::one())
        };
        if w <= self.d_min {
            return at_min;
        }
        if w >= self.d_max {
            return at_max;
        }
        let t = self.model.transmission(self.encoder.encode(w));
        ((t - self.t_floor) / self.t_span)
            .max(T::zero())
            .min(T::one())
    }

    /// d eval / dw; zero outside the open domain.
    #[inline]
    pub fn deriv(&self, w: T) -> T {
        if w <= self.d_min || w >= self.d_max {
            return T::zero();
        }
        self.model.slope(self.encoder.encode(w)) * self.encoder.gamma / self.t_span
    }
}
