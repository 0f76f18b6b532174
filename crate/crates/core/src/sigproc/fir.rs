use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sigproc::Trace;

pub const DEFAULT_TAPS: usize = 129;

/// Cutoff of the symbol-rate low-pass filter relative to the baud rate.
pub const CUTOFF_PER_BAUD: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirWindow {
    #[default]
    Hamming,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirSpec {
    /// Hz.
    pub cutoff: f64,
    pub taps: usize,
    #[serde(default)]
    pub window: FirWindow,
}

impl FirSpec {
    pub fn new(cutoff: f64, taps: usize) -> Result<Self> {
        if taps == 0 || taps % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "tap count must be odd and positive, got {taps}"
            )));
        }
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff must be positive, got {cutoff}"
            )));
        }
        Ok(Self {
            cutoff,
            taps,
            window: FirWindow::Hamming,
        })
    }

    /// 1.2 × baud cutoff with the default tap count.
    pub fn for_baud(baud: f64) -> Result<Self> {
        Self::new(CUTOFF_PER_BAUD * baud, DEFAULT_TAPS)
    }

    /// 1.2 × baud cutoff with a kernel one symbol long, so a symbol centre
    /// only sees its own symbol and its neighbours' edges. Long kernels ring
    /// on zero-order-hold input.
    pub fn symbol_matched(baud: f64, samples_per_symbol: usize) -> Result<Self> {
        Self::new(CUTOFF_PER_BAUD * baud, samples_per_symbol | 1)
    }

    /// Normalized Hamming-windowed sinc taps for `sample_rate`.
    pub fn design(&self, sample_rate: f64) -> Result<Vec<f64>> {
        let nyquist = 0.5 * sample_rate;
        if !(self.cutoff < nyquist) {
            return Err(Error::CutoffAboveNyquist {
                cutoff: self.cutoff,
                nyquist,
            });
        }
        if self.taps == 0 || self.taps % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "tap count must be odd and positive, got {}",
                self.taps
            )));
        }
        let fc = self.cutoff / sample_rate;
        let m = (self.taps - 1) as f64;
        let mut h: Vec<f64> = (0..self.taps)
            .map(|i| {
                let k = i as f64 - m / 2.0;
                let sinc = if k == 0.0 {
                    2.0 * fc
                } else {
                    (2.0 * PI * fc * k).sin() / (PI * k)
                };
                let w = match self.window {
                    FirWindow::Hamming if self.taps > 1 => {
                        0.54 - 0.46 * (2.0 * PI * i as f64 / m).cos()
                    }
                    FirWindow::Hamming => 1.0,
                };
                sinc * w
            })
            .collect();
        let sum: f64 = h.iter().sum();
        for v in &mut h {
            *v /= sum;
        }
        Ok(h)
    }
}

/// Magnitude response of `taps` at `freq` for the given sample rate.
pub fn magnitude_response(taps: &[f64], freq: f64, sample_rate: f64) -> f64 {
    let w = 2.0 * PI * freq / sample_rate;
    let (re, im) = taps
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(re, im), (k, &h)| {
            (re + h * (w * k as f64).cos(), im - h * (w * k as f64).sin())
        });
    re.hypot(im)
}

/// Mirror index into `[0, len)` without repeating the edge sample.
fn reflect(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= len as isize {
        j = period - j;
    }
    j as usize
}

/// Zero-phase low-pass filtering; the output has the input's length and
/// timing, with edges handled by reflection.
pub fn fir_lowpass<T: Scalar>(trace: &Trace<T>, spec: &FirSpec) -> Result<Trace<T>> {
    let h = spec.design(trace.sample_rate)?;
    let len = trace.len();
    if len == 0 {
        return Err(Error::EmptyInput);
    }
    let half = (h.len() / 2) as isize;
    let x: Vec<f64> = trace.samples.iter().map(|v| v.to_f64_lossy()).collect();
    let samples = (0..len as isize)
        .map(|i| {
            let acc: f64 = h
                .iter()
                .enumerate()
                .map(|(k, &hk)| hk * x[reflect(i + k as isize - half, len)])
                .sum();
            T::lit(acc)
        })
        .collect();
    Ok(Trace {
        samples,
        sample_rate: trace.sample_rate,
        t0: trace.t0,
    })
}

/// Keeps samples `0, factor, 2·factor, …`; trailing samples that do not
/// complete a group are dropped.
pub fn decimate<T: Scalar>(trace: &Trace<T>, factor: usize) -> Result<Trace<T>> {
    if factor == 0 {
        return Err(Error::ZeroFactor);
    }
    let keep = trace.len() / factor;
    Ok(Trace {
        samples: (0..keep).map(|i| trace.samples[i * factor]).collect(),
        sample_rate: trace.sample_rate / factor as f64,
        t0: trace.t0,
    })
}

/// Factor that brings `sample_rate` down to `target_sps` samples per symbol.
pub fn decimation_factor(sample_rate: f64, baud: f64, target_sps: f64) -> Result<usize> {
    let f = (sample_rate / (baud * target_sps)).round();
    if !(f >= 1.0) {
        return Err(Error::ZeroFactor);
    }
    Ok(f as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_passes_with_unit_gain() {
        let t = Trace::new(vec![0.7f64; 400], 80e9, 0.0).unwrap();
        let y = fir_lowpass(&t, &FirSpec::for_baud(10e9).unwrap()).unwrap();
        assert_eq!(y.len(), 400);
        assert!(y.samples.iter().all(|v| (v - 0.7).abs() < 1e-6));
    }

    #[test]
    fn cutoff_above_nyquist() {
        let t = Trace::new(vec![0.0f64; 10], 20e9, 0.0).unwrap();
        let e = fir_lowpass(&t, &FirSpec::for_baud(10e9).unwrap()).unwrap_err();
        assert!(matches!(e, Error::CutoffAboveNyquist { .. }));
    }

    #[test]
    fn even_taps_rejected() {
        assert!(FirSpec::new(1e9, 128).is_err());
        assert_eq!(FirSpec::symbol_matched(1e9, 8).unwrap().taps, 9);
        assert_eq!(FirSpec::symbol_matched(1e9, 9).unwrap().taps, 9);
    }

    #[test]
    fn ramp_decimation() {
        let t = Trace::new((0..17).map(|i| i as f64).collect(), 8.0, 0.0).unwrap();
        let d = decimate(&t, 4).unwrap();
        assert_eq!(d.samples, vec![0.0, 4.0, 8.0, 12.0]);
        assert_eq!(d.sample_rate, 2.0);
        assert_eq!(decimate(&t, 1).unwrap(), t);
        assert!(matches!(decimate(&t, 0), Err(Error::ZeroFactor)));
    }

    #[test]
    fn reference_rate_factors() {
        assert_eq!(decimation_factor(200e9, 10e9, 20.0).unwrap(), 1);
        assert_eq!(decimation_factor(200e9, 1e9, 20.0).unwrap(), 10);
    }

    #[test]
    fn reflect_indices() {
        let idx: Vec<usize> = (-3..8).map(|i| reflect(i, 5)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1]);
    }
}
