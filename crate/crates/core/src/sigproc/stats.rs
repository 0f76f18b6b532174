use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Denominator of the relative error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNorm {
    /// `max_j reference_j`.
    #[default]
    GlobalMax,
    /// `reference_i`.
    PerSymbol,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub errors: Vec<f64>,
    /// `bins + 1` ascending edges; the last bin is closed.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub mean: f64,
    /// Sample standard deviation of `errors`.
    pub sigma_hat: f64,
}

pub fn error_stats<T: Scalar>(measured: &[T], reference: &[T], bins: usize) -> Result<ErrorStats> {
    error_stats_with(measured, reference, bins, ErrorNorm::GlobalMax)
}

pub fn error_stats_with<T: Scalar>(
    measured: &[T],
    reference: &[T],
    bins: usize,
    norm: ErrorNorm,
) -> Result<ErrorStats> {
    if measured.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: measured.len(),
            right: reference.len(),
        });
    }
    if measured.is_empty() {
        return Err(Error::EmptyInput);
    }
    if bins == 0 {
        return Err(Error::InvalidParameter(
            "histogram needs at least one bin".into(),
        ));
    }
    let m: Vec<f64> = measured.iter().map(|v| v.to_f64_lossy()).collect();
    let r: Vec<f64> = reference.iter().map(|v| v.to_f64_lossy()).collect();
    let errors: Vec<f64> = match norm {
        ErrorNorm::GlobalMax => {
            let scale = r.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            if !(scale != 0.0 && scale.is_finite()) {
                return Err(Error::ZeroReference);
            }
            m.iter().zip(&r).map(|(a, b)| (a - b) / scale).collect()
        }
        ErrorNorm::PerSymbol => {
            if r.iter().any(|&b| b == 0.0) {
                return Err(Error::ZeroReference);
            }
            m.iter().zip(&r).map(|(a, b)| (a - b) / b).collect()
        }
    };

    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let sigma_hat = if errors.len() > 1 {
        (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };

    let (mut lo, mut hi) = errors
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &e| {
            (l.min(e), h.max(e))
        });
    if hi - lo <= 0.0 {
        let pad = 0.5 * lo.abs().max(1e-12);
        lo -= pad;
        hi += pad;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0usize; bins];
    for &e in &errors {
        let idx = (((e - lo) / width).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(ErrorStats {
        errors,
        edges,
        counts,
        mean,
        sigma_hat,
    })
}

pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,count";

impl ErrorStats {
    /// Histogram rows followed by a `# n=…,mean=…,sigma_hat=…` summary line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(HISTOGRAM_HEADER);
        s.push('\n');
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(s, "{:.16e},{:.16e},{c}", self.edges[i], self.edges[i + 1]);
        }
        let _ = writeln!(
            s,
            "# n={},mean={:.16e},sigma_hat={:.16e}",
            self.errors.len(),
            self.mean,
            self.sigma_hat
        );
        s
    }
}
