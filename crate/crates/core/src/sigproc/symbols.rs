use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::activation::{apply_noise_in_place, NoiseSpec};
use crate::error::{Error, Result};
use crate::mzm::{AffineEncoder, SineTransferModel};
use crate::scalar::Scalar;
use crate::sigproc::Trace;

/// Default fraction of the symbol period averaged around each centre.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformSpec {
    /// Symbols per second.
    pub baud: f64,
    /// Samples per second.
    pub sample_rate: f64,
    /// Symbol resolution; `None` for continuous symbols.
    #[serde(default)]
    pub bit_depth: Option<u32>,
    pub n: usize,
}

impl WaveformSpec {
    pub fn samples_per_symbol(&self) -> f64 {
        self.sample_rate / self.baud
    }

    /// Integral samples per symbol, as required for synthesis.
    pub fn integral_sps(&self) -> Result<usize> {
        if !(self.baud > 0.0 && self.sample_rate >= 2.0 * self.baud && self.sample_rate.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "sample rate {} must be at least twice the baud rate {}",
                self.sample_rate, self.baud
            )));
        }
        let sps = self.samples_per_symbol();
        let r = sps.round();
        if (sps - r).abs() > 1e-9 * sps {
            return Err(Error::NonIntegralSps(sps));
        }
        Ok(r as usize)
    }
}

/// `n` symbols drawn uniformly from `2^bits` evenly spaced levels in `[0, 1]`
/// (continuous when `bits` is `None`).
pub fn uniform_symbols<T: Scalar>(n: usize, bits: Option<u32>, rng: &mut dyn RngCore) -> Vec<T> {
    match bits {
        Some(b) => {
            let top = (1u64 << b.min(52)) - 1;
            (0..n)
                .map(|_| {
                    let k = rng.random_range(0..=top);
                    T::lit(k as f64 / top.max(1) as f64)
                })
                .collect()
        }
        None => (0..n).map(|_| T::lit(rng.random::<f64>())).collect(),
    }
}

/// Noise-free transmission of each symbol.
pub fn symbol_transmissions<T: Scalar>(
    symbols: &[T],
    model: &SineTransferModel<T>,
    encoder: &AffineEncoder<T>,
) -> Vec<T> {
    symbols
        .iter()
        .map(|&s| model.transmission(encoder.encode(s)))
        .collect()
}

/// Zero-order-hold drive waveform through the modulator, with noise added
/// per sample. Symbol `k` occupies samples `[k·sps, (k+1)·sps)`.
pub fn synthesize_trace<T: Scalar>(
    symbols: &[T],
    spec: &WaveformSpec,
    model: &SineTransferModel<T>,
    encoder: &AffineEncoder<T>,
    noise: &NoiseSpec<T>,
    rng: Option<&mut dyn RngCore>,
) -> Result<Trace<T>> {
    let sps = spec.integral_sps()?;
    let levels = symbol_transmissions(symbols, model, encoder);
    let mut samples: Vec<T> = levels
        .iter()
        .flat_map(|&v| std::iter::repeat_n(v, sps))
        .collect();
    apply_noise_in_place(&mut samples, noise, rng)?;
    Trace::new(samples, spec.sample_rate, 0.0)
}

/// Integration window length in seconds.
pub fn integration_window(baud: f64, window_fraction: f64) -> f64 {
    window_fraction / baud
}

/// Mean amplitude over the centred `window_fraction` of every complete
/// symbol period, with symbol boundaries at the trace's first sample.
pub fn integrate_symbols<T: Scalar>(
    trace: &Trace<T>,
    baud: f64,
    window_fraction: f64,
) -> Result<Vec<T>> {
    if !(baud > 0.0) || !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need baud > 0 and window fraction in (0, 1], got {baud} and {window_fraction}"
        )));
    }
    let sps = trace.sample_rate / baud;
    let count = (trace.len() as f64 / sps + 1e-9).floor() as usize;
    if count == 0 {
        return Err(Error::EmptyInput);
    }
    let half = 0.5 * window_fraction * sps;
    let eps = 1e-9 * sps;
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let centre = (k as f64 + 0.5) * sps;
        let lo = ((centre - half - eps).ceil().max(0.0)) as usize;
        let hi = (((centre + half - eps).ceil()) as usize).min(trace.len());
        if hi <= lo {
            return Err(Error::EmptyWindow);
        }
        let sum: T = trace.samples[lo..hi].iter().copied().sum();
        out.push(sum / T::from_usize_lossy(hi - lo));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mzm::VoltageWindow;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn device() -> (SineTransferModel<f64>, AffineEncoder<f64>) {
        let w = VoltageWindow::new(0.0, 5.73).unwrap();
        let m = SineTransferModel::new(0.5, PI / 5.73, -PI / 2.0, w).unwrap();
        (m, AffineEncoder::new(0.0, 1.0, w).unwrap())
    }

    fn spec(n: usize) -> WaveformSpec {
        WaveformSpec {
            baud: 10e9,
            sample_rate: 80e9,
            bit_depth: Some(5),
            n,
        }
    }

    #[test]
    fn trace_length_and_constant_level() {
        let (m, e) = device();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sym = uniform_symbols::<f64>(2048, Some(5), &mut rng);
        let t = synthesize_trace(&sym, &spec(2048), &m, &e, &NoiseSpec::none(), None).unwrap();
        assert_eq!(t.len(), 16384);

        let quad = vec![0.5; 10];
        let t = synthesize_trace(&quad, &spec(10), &m, &e, &NoiseSpec::none(), None).unwrap();
        assert!(t.samples.iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn non_integral_sps() {
        let (m, e) = device();
        let s = WaveformSpec {
            sample_rate: 75e9,
            ..spec(4)
        };
        let r = synthesize_trace(&[0.1; 4], &s, &m, &e, &NoiseSpec::none(), None);
        assert!(matches!(r, Err(Error::NonIntegralSps(_))));
    }

    #[test]
    fn noiseless_integration_recovers_levels() {
        let (m, e) = device();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sym = uniform_symbols::<f64>(256, Some(5), &mut rng);
        let t = synthesize_trace(&sym, &spec(256), &m, &e, &NoiseSpec::none(), None).unwrap();
        let got = integrate_symbols(&t, 10e9, DEFAULT_WINDOW_FRACTION).unwrap();
        let want = symbol_transmissions(&sym, &m, &e);
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn full_window_is_symbol_mean() {
        let t = Trace::new((0..16).map(|i| i as f64).collect(), 8.0, 0.0).unwrap();
        let y = integrate_symbols(&t, 1.0, 1.0).unwrap();
        assert_eq!(y, vec![3.5, 11.5]);
    }

    #[test]
    fn window_of_twenty_picoseconds() {
        assert!((integration_window(10e9, 0.2) - 20e-12).abs() < 1e-24);
    }

    #[test]
    fn window_too_short() {
        let t = Trace::new(vec![0.0f64; 9], 3.0, 0.0).unwrap();
        assert!(matches!(
            integrate_symbols(&t, 1.0, 0.2),
            Err(Error::EmptyWindow)
        ));
    }
}
