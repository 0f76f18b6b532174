use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Closed voltage interval `[v_min, v_max]` in volts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoltageWindow<T> {
    pub v_min: T,
    pub v_max: T,
}

impl<T: Scalar> VoltageWindow<T> {
    pub fn new(v_min: T, v_max: T) -> Result<Self> {
        if !(v_min.is_finite() && v_max.is_finite()) || v_min >= v_max {
            return Err(Error::InvalidParameter(format!(
                "voltage window requires finite v_min < v_max, got [{v_min}, {v_max}]"
            )));
        }
        Ok(Self { v_min, v_max })
    }

    pub fn width(&self) -> T {
        self.v_max - self.v_min
    }

    pub fn center(&self) -> T {
        (self.v_min + self.v_max) * T::lit(0.5)
    }

    pub fn contains(&self, v: T) -> bool {
        v >= self.v_min && v <= self.v_max
    }
}

/// Portion of the sinusoid an activation is mapped onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeSegment {
    /// Minimum transmission up to the point of maximum positive gradient.
    Rising,
    /// Maximum negative gradient down to the minimum transmission.
    Falling,
    /// Minimum transmission up to maximum transmission.
    FullSwing,
}

impl SlopeSegment {
    /// Phase `b·V + c` of the two landmarks for the period anchored at `k = 0`.
    fn phases<T: Scalar>(self) -> (T, T) {
        let pi = T::PI();
        let half = T::FRAC_PI_2();
        match self {
            SlopeSegment::Rising => (-half, T::zero()),
            SlopeSegment::Falling => (pi, pi + half),
            SlopeSegment::FullSwing => (-half, half),
        }
    }
}

/// MZM intensity transfer `T(V) = a·(1 + sin(b·V + c))`.
///
/// `b = π / V_π` and `c` absorbs the static bias phase. `window` is the
/// voltage span the parameters were fitted over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineTransferModel<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub window: VoltageWindow<T>,
}

impl<T: Scalar> SineTransferModel<T> {
    pub fn new(a: T, b: T, c: T, window: VoltageWindow<T>) -> Result<Self> {
        if !(a.is_finite() && a > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "amplitude a must be > 0, got {a}"
            )));
        }
        if !(b.is_finite() && b > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "phase rate b must be > 0, got {b}"
            )));
        }
        if !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "phase offset c must be finite, got {c}"
            )));
        }
        Ok(Self { a, b, c, window })
    }

    /// Builds a model from the device-level description: half-wave voltage
    /// and the voltage at which transmission is minimal.
    pub fn from_v_pi(a: T, v_pi: T, v_at_min: T, window: VoltageWindow<T>) -> Result<Self> {
        let b = T::PI() / v_pi;
        Self::new(a, b, -T::FRAC_PI_2() - b * v_at_min, window)
    }

    #[inline]
    pub fn transmission(&self, v: T) -> T {
        self.a * (T::one() + (self.b * v + self.c).sin())
    }

    /// dT/dV.
    #[inline]
    pub fn slope(&self, v: T) -> T {
        self.a * self.b * (self.b * v + self.c).cos()
    }

    pub fn v_pi(&self) -> T {
        T::PI() / self.b
    }

    pub fn period(&self) -> T {
        T::TAU() / self.b
    }

    pub fn max_transmission(&self) -> T {
        self.a + self.a
    }

    /// Voltage window of the requested slope segment, choosing the period
    /// whose segment center lies closest to the fit window's center.
    pub fn slope_window(&self, segment: SlopeSegment) -> Result<VoltageWindow<T>> {
        let (p0, p1) = segment.phases::<T>();
        let tau = T::TAU();
        // Landmark voltages for k = 0, then shift by whole periods.
        let v0 = (p0 - self.c) / self.b;
        let v1 = (p1 - self.c) / self.b;
        let period = self.period();
        let mid = (v0 + v1) * T::lit(0.5);
        let k = ((self.window.center() - mid) / period).round();
        let shift = k * tau / self.b;
        let (lo, hi) = (v0 + shift, v1 + shift);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::WindowOutOfRange);
        }
        let gap = if hi < self.window.v_min {
            self.window.v_min - hi
        } else if lo > self.window.v_max {
            lo - self.window.v_max
        } else {
            T::zero()
        };
        if gap > period {
            return Err(Error::WindowOutOfRange);
        }
        VoltageWindow::new(lo, hi)
    }
}

/// Range-preserving affine map from the digital domain `[w_min, w_max]`
/// onto a voltage window. No clipping happens here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineEncoder<T> {
    pub gamma: T,
    pub delta: T,
    pub w_min: T,
    pub w_max: T,
}

impl<T: Scalar> AffineEncoder<T> {
    pub fn new(w_min: T, w_max: T, window: VoltageWindow<T>) -> Result<Self> {
        if w_min == w_max {
            return Err(Error::DegenerateRange(w_min.to_f64_lossy()));
        }
        if !(w_min.is_finite() && w_max.is_finite()) || w_min > w_max {
            return Err(Error::InvalidParameter(format!(
                "encoder range requires finite w_min < w_max, got [{w_min}, {w_max}]"
            )));
        }
        let gamma = (window.v_max - window.v_min) / (w_max - w_min);
        let delta = window.v_min - gamma * w_min;
        Ok(Self {
            gamma,
            delta,
            w_min,
            w_max,
        })
    }

    #[inline]
    pub fn encode(&self, w: T) -> T {
        self.gamma * w + self.delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn device() -> SineTransferModel<f64> {
        let w = VoltageWindow::new(0.0, 5.73).unwrap();
        SineTransferModel::new(0.5, PI / 5.73, -PI / 2.0, w).unwrap()
    }

    #[test]
    fn transmission_landmarks() {
        let m = device();
        assert!(m.transmission(0.0).abs() < 1e-15);
        assert!((m.transmission(5.73) - 1.0).abs() < 1e-15);
        // independent evaluation of 0.5*(1+sin(pi/5.73 - pi/2))
        let expected = 0.5 * (1.0 + (PI / 5.73 - PI / 2.0).sin());
        assert_eq!(m.transmission(1.0), expected);
        assert!((expected - 0.07328650520543906).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        let w = VoltageWindow::new(0.0, 1.0).unwrap();
        assert!(SineTransferModel::new(0.0, 1.0, 0.0, w).is_err());
        assert!(SineTransferModel::new(1.0, -1.0, 0.0, w).is_err());
        assert!(VoltageWindow::new(1.0, 1.0).is_err());
        assert!(VoltageWindow::new(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn slope_windows_of_reference_device() {
        let m = device();
        let r = m.slope_window(SlopeSegment::Rising).unwrap();
        assert!(r.v_min.abs() < 1e-12 && (r.v_max - 2.865).abs() < 1e-12);
        let f = m.slope_window(SlopeSegment::FullSwing).unwrap();
        assert!(f.v_min.abs() < 1e-12 && (f.v_max - 5.73).abs() < 1e-12);
        let d = m.slope_window(SlopeSegment::Falling).unwrap();
        assert!((m.slope(d.v_min) + m.a * m.b).abs() < 1e-12);
        assert!(m.transmission(d.v_max).abs() < 1e-12);
    }

    #[test]
    fn slope_window_picks_period_nearest_window_center() {
        let w = VoltageWindow::new(20.0f64, 25.73).unwrap();
        let m = SineTransferModel::from_v_pi(0.5, 5.73, 0.0, w).unwrap();
        let r = m.slope_window(SlopeSegment::FullSwing).unwrap();
        // minima sit at multiples of 11.46 V; the one at 22.92 is closest
        assert!((r.v_min - 22.92).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn encoder_examples() {
        let e = AffineEncoder::new(0.0f64, 4.0, VoltageWindow::new(0.0, 2.865).unwrap()).unwrap();
        assert_eq!(e.encode(0.0), 0.0);
        assert!((e.encode(4.0) - 2.865).abs() <= f64::EPSILON * 2.865);

        let e = AffineEncoder::new(0.0f64, 10.0, VoltageWindow::new(1.0, 2.0).unwrap()).unwrap();
        assert!((e.gamma - 0.1).abs() < 1e-16);
        assert_eq!(e.delta, 1.0);
        assert!((e.encode(5.0) - 1.5).abs() < 1e-15);
        // no clipping
        assert!((e.encode(20.0) - 3.0).abs() < 1e-15);

        assert!(matches!(
            AffineEncoder::new(3.0, 3.0, VoltageWindow::new(1.0, 2.0).unwrap()),
            Err(Error::DegenerateRange(_))
        ));
    }
}
