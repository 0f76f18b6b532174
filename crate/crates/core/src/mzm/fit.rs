//! Least-squares fit of `a·(1 + sin(b·V + c))` to measured transfer curves.
//!
//! Damped Gauss-Newton with an analytic Jacobian. Without a user guess the
//! phase rate is seeded by scanning a frequency grid and solving the linear
//! problem `A + B·sin(ωV) + C·cos(ωV)` at each candidate, which avoids
//! locking onto an aliased period.

use crate::error::{Error, Result};
use crate::linalg;
use crate::mzm::model::{SineTransferModel, VoltageWindow};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions<T> {
    pub max_iter: usize,
    /// Stop once an accepted step changes the residual sum of squares by
    /// less than this fraction.
    pub rel_tol: T,
    /// Root-mean-square residual above which hitting `max_iter` is reported
    /// as non-convergence.
    pub residual_tol: T,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        Self {
            max_iter: 200,
            rel_tol: T::lit(1e-10),
            residual_tol: T::lit(1e-3),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TransferFit<T> {
    pub model: SineTransferModel<T>,
    /// Euclidean norm of the residual vector.
    pub residual_norm: T,
    pub rms_residual: T,
    pub iterations: usize,
}

const MIN_SAMPLES: usize = 8;
const MAX_SCAN: usize = 4096;

pub fn fit_transfer<T: Scalar>(
    samples: &[(T, T)],
    init: Option<&SineTransferModel<T>>,
    opts: &FitOptions<T>,
) -> Result<TransferFit<T>> {
    if samples.len() < 3 {
        return Err(Error::DegenerateData(format!(
            "{} samples cannot determine 3 parameters",
            samples.len()
        )));
    }
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "at least {MIN_SAMPLES} samples required, got {}",
            samples.len()
        )));
    }
    if let Some(&(v, t)) = samples
        .iter()
        .find(|(v, t)| !v.is_finite() || !t.is_finite())
    {
        return Err(Error::InvalidParameter(format!(
            "non-finite sample ({v}, {t})"
        )));
    }
    if let Some(&(_, t)) = samples.iter().find(|(_, t)| *t < T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "negative transmission {t}"
        )));
    }
    let (v_lo, v_hi) = samples
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &(v, _)| {
            (lo.min(v), hi.max(v))
        });
    if v_lo == v_hi {
        return Err(Error::DegenerateData("all voltages are equal".into()));
    }
    let window = VoltageWindow::new(v_lo, v_hi)?;

    let starts: Vec<[T; 3]> = match init {
        Some(m) => vec![[m.a, m.b, m.c]],
        None => scan_initial_guesses(samples, v_hi - v_lo),
    };

    let mut best: Option<(T, [T; 3], usize, bool)> = None;
    for start in starts {
        let (ssr, p, iters, converged) = levenberg_marquardt(samples, start, opts);
        if best.map_or(true, |(b, ..)| ssr < b) {
            best = Some((ssr, p, iters, converged));
        }
    }
    let (ssr, p, iterations, converged) = best.expect("at least one start");
    let n = T::from_usize_lossy(samples.len());
    let rms = (ssr / n).sqrt();
    if !converged && !(rms <= opts.residual_tol) {
        return Err(Error::NonConvergence {
            iterations,
            rms_residual: rms.to_f64_lossy(),
        });
    }
    let [a, b, c] = canonical(p);
    let model = SineTransferModel::new(a, b, c, window)?;
    Ok(TransferFit {
        model,
        residual_norm: ssr.sqrt(),
        rms_residual: rms,
        iterations,
    })
}

/// Maps an arbitrary `(a, b, c)` to `a > 0`, `b > 0`, `c ∈ (-π, π]`
/// describing the same curve.
fn canonical<T: Scalar>([a, mut b, mut c]: [T; 3]) -> [T; 3] {
    if b < T::zero() {
        // sin(-|b|V + c) = sin(|b|V + π - c)
        b = -b;
        c = T::PI() - c;
    }
    let tau = T::TAU();
    c = c - tau * ((c + T::PI()) / tau).floor();
    if c <= -T::PI() {
        c = c + tau;
    }
    [a, b, c]
}

fn ssr_of<T: Scalar>(samples: &[(T, T)], [a, b, c]: [T; 3]) -> T {
    samples
        .iter()
        .map(|&(v, t)| {
            let r = a * (T::one() + (b * v + c).sin()) - t;
            r * r
        })
        .sum()
}

fn scan_initial_guesses<T: Scalar>(samples: &[(T, T)], span: T) -> Vec<[T; 3]> {
    let mut vs: Vec<T> = samples.iter().map(|s| s.0).collect();
    vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut steps: Vec<T> = vs
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > T::zero())
        .collect();
    steps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let dv = steps[steps.len() / 2];

    // Slowest admissible rate puts a quarter period across the span.
    let w_lo = T::FRAC_PI_2() / span;
    let w_hi = T::PI() / dv;
    let mut count = ((w_hi - w_lo) / (T::PI() / (T::lit(4.0) * span)))
        .ceil()
        .to_usize()
        .unwrap_or(MAX_SCAN);
    count = count.clamp(16, MAX_SCAN);

    let mut scored: Vec<(T, [T; 3])> = (0..=count)
        .filter_map(|i| {
            let w = w_lo + (w_hi - w_lo) * T::from_usize_lossy(i) / T::from_usize_lossy(count);
            linear_sinusoid(samples, w)
        })
        .collect();
    scored.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    // A few distinct local candidates guard against picking a sidelobe.
    scored.into_iter().take(4).map(|(_, p)| p).collect()
}

/// For a fixed rate `w`, solves the linear fit `A + B sin + C cos` and maps
/// it onto the constrained family.
fn linear_sinusoid<T: Scalar>(samples: &[(T, T)], w: T) -> Option<(T, [T; 3])> {
    let mut ata = [[T::zero(); 3]; 3];
    let mut atb = [T::zero(); 3];
    for &(v, t) in samples {
        let row = [T::one(), (w * v).sin(), (w * v).cos()];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] = ata[i][j] + row[i] * row[j];
            }
            atb[i] = atb[i] + row[i] * t;
        }
    }
    let [offset, s, co] = linalg::solve(ata, atb)?;
    let amp = (s * s + co * co).sqrt();
    let ssr: T = samples
        .iter()
        .map(|&(v, t)| {
            let r = offset + s * (w * v).sin() + co * (w * v).cos() - t;
            r * r
        })
        .sum();
    let a = ((offset + amp) * T::lit(0.5)).max(T::epsilon());
    Some((ssr, [a, w, co.atan2(s)]))
}

fn levenberg_marquardt<T: Scalar>(
    samples: &[(T, T)],
    start: [T; 3],
    opts: &FitOptions<T>,
) -> (T, [T; 3], usize, bool) {
    let mut p = start;
    let mut ssr = ssr_of(samples, p);
    let scale: T = samples
        .iter()
        .map(|s| s.1 * s.1)
        .sum::<T>()
        .max(T::min_positive_value());
    let floor = scale * T::epsilon() * T::epsilon();
    let mut lambda = T::lit(1e-3);

    for iter in 1..=opts.max_iter {
        if ssr <= floor {
            return (ssr, p, iter - 1, true);
        }
        let [a, b, c] = p;
        let mut jtj = [[T::zero(); 3]; 3];
        let mut jtr = [T::zero(); 3];
        for &(v, t) in samples {
            let theta = b * v + c;
            let (s, co) = theta.sin_cos();
            let r = a * (T::one() + s) - t;
            let j = [T::one() + s, a * co * v, a * co];
            for i in 0..3 {
                for k in 0..3 {
                    jtj[i][k] = jtj[i][k] + j[i] * j[k];
                }
                jtr[i] = jtr[i] + j[i] * r;
            }
        }

        let mut accepted = false;
        while lambda < T::lit(1e16) {
            let mut damped = jtj;
            for i in 0..3 {
                damped[i][i] = damped[i][i] + lambda * jtj[i][i].max(T::epsilon());
            }
            let step = linalg::solve(damped, [-jtr[0], -jtr[1], -jtr[2]]);
            if let Some(d) = step {
                let trial = [a + d[0], b + d[1], c + d[2]];
                let trial_ssr = ssr_of(samples, trial);
                if trial_ssr.is_finite() && trial_ssr <= ssr {
                    let change = (ssr - trial_ssr) / ssr.max(T::min_positive_value());
                    p = trial;
                    ssr = trial_ssr;
                    lambda = (lambda * T::lit(0.1)).max(T::lit(1e-12));
                    accepted = true;
                    if change < opts.rel_tol {
                        return (ssr, p, iter, true);
                    }
                    break;
                }
            }
            lambda = lambda * T::lit(10.0);
        }
        if !accepted {
            // No descent direction left: a stationary point.
            return (ssr, p, iter, true);
        }
    }
    (ssr, p, opts.max_iter, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(a: f64, b: f64, c: f64, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let v = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (v, a * (1.0 + (b * v + c).sin()))
            })
            .collect()
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let s = synth(0.48, 0.55, 0.3, -6.0, 6.0, 64);
        let fit = fit_transfer(&s, None, &FitOptions::default()).unwrap();
        let m = fit.model;
        for (got, want) in [(m.a, 0.48), (m.b, 0.55), (m.c, 0.3)] {
            assert!(((got - want) / want).abs() < 1e-6, "{got} vs {want}");
        }
        assert!(fit.residual_norm < 1e-10);
        assert_eq!(m.window.v_min, -6.0);
        assert_eq!(m.window.v_max, 6.0);
    }

    #[test]
    fn accepts_user_guess() {
        let s = synth(0.5, 1.1, -1.0, 0.0, 4.0, 40);
        let w = VoltageWindow::new(0.0, 4.0).unwrap();
        let guess = SineTransferModel::new(0.45, 1.0, -0.8, w).unwrap();
        let fit = fit_transfer(&s, Some(&guess), &FitOptions::default()).unwrap();
        assert!((fit.model.b - 1.1).abs() < 1e-8);
    }

    #[test]
    fn degenerate_inputs() {
        let same: Vec<(f64, f64)> = (0..10).map(|i| (1.0, i as f64 * 0.1)).collect();
        assert!(matches!(
            fit_transfer(&same, None, &FitOptions::default()),
            Err(Error::DegenerateData(_))
        ));
        let few = [(0.0, 0.1), (1.0, 0.2)];
        assert!(matches!(
            fit_transfer(&few, None, &FitOptions::default()),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        // Pure noise-like data far from the family cannot reach a small rms.
        let s: Vec<(f64, f64)> = (0..32)
            .map(|i| (i as f64, if i % 3 == 0 { 1.0 } else { 0.0 }))
            .collect();
        let opts = FitOptions {
            max_iter: 1,
            rel_tol: 0.0,
            residual_tol: 1e-9,
        };
        let err = fit_transfer(&s, None, &opts).unwrap_err();
        assert!(err.is_numerical(), "{err}");
    }

    #[test]
    fn canonical_flips_negative_rate() {
        let [a, b, c] = canonical([0.5, -0.7, 0.2]);
        for v in [-1.0, 0.3, 2.0] {
            let orig = 0.5 * (1.0 + (-0.7 * v + 0.2f64).sin());
            assert!((a * (1.0 + (b * v + c).sin()) - orig).abs() < 1e-14);
        }
        assert!(b > 0.0 && c > -std::f64::consts::PI && c <= std::f64::consts::PI);
    }
}
