use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mzm::parse_pair;
use crate::scalar::Scalar;

pub const TRACE_HEADER: &str = "time_s,amplitude";

/// Uniformly sampled waveform. Sample `i` is taken at `t0 + i / sample_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    pub samples: Vec<T>,
    /// Samples per second.
    pub sample_rate: f64,
    pub t0: f64,
}

impl<T: Scalar> Trace<T> {
    pub fn new(samples: Vec<T>, sample_rate: f64, t0: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidParameter("t0 must be finite".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "trace contains non-finite samples".into(),
            ));
        }
        Ok(Self {
            samples,
            sample_rate,
            t0,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(48 * (self.len() + 1));
        s.push_str(TRACE_HEADER);
        s.push('\n');
        for (i, v) in self.samples.iter().enumerate() {
            let _ = writeln!(s, "{:.16e},{:.16e}", self.time(i), v.to_f64_lossy());
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<(usize, f64, T)> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line == TRACE_HEADER) {
                continue;
            }
            let (t, _) = parse_pair::<f64>(line, idx + 1)?;
            let (_, a) = parse_pair::<T>(line, idx + 1)?;
            rows.push((idx + 1, t, a));
        }
        if rows.len() < 2 {
            return Err(Error::parse(
                rows.first().map_or(1, |r| r.0),
                "at least two samples are needed to infer the sample rate",
            ));
        }
        let mut steps: Vec<f64> = rows.windows(2).map(|w| w[1].1 - w[0].1).collect();
        let mut sorted = steps.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        if !(median > 0.0) {
            return Err(Error::NonUniformSampling {
                line: rows[1].0,
                step: steps[0],
                median,
            });
        }
        for (k, step) in steps.drain(..).enumerate() {
            if (step - median).abs() > 1e-3 * median {
                return Err(Error::NonUniformSampling {
                    line: rows[k + 1].0,
                    step,
                    median,
                });
            }
        }
        let t0 = rows[0].1;
        Self::new(rows.into_iter().map(|r| r.2).collect(), 1.0 / median, t0)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub fn load_trace<T: Scalar>(path: impl AsRef<Path>) -> Result<Trace<T>> {
    Trace::load(path)
}

pub fn save_trace<T: Scalar>(trace: &Trace<T>, path: impl AsRef<Path>) -> Result<()> {
    trace.save(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_from_median_step() {
        let t = Trace::<f64>::from_csv("time_s,amplitude\n0,1\n1e-9,2\n2e-9,3\n").unwrap();
        assert!((t.sample_rate - 1e9).abs() < 1e-3);
        assert_eq!(t.samples, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn glitch_rejected() {
        let text = "time_s,amplitude\n0,1\n1e-9,1\n2e-9,1\n3.05e-9,1\n4.05e-9,1\n";
        assert!(matches!(
            Trace::<f64>::from_csv(text),
            Err(Error::NonUniformSampling { line: 5, .. })
        ));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let samples: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        let t = Trace::new(samples.clone(), 80e9, 0.0).unwrap();
        let back = Trace::<f64>::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.samples, samples);
        assert!((back.sample_rate - 80e9).abs() / 80e9 < 1e-9);
    }

    #[test]
    fn malformed_line_named() {
        let e = Trace::<f64>::from_csv("time_s,amplitude\n0,1\n1,abc\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
    }
}
