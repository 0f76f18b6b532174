//! Normalization stage `N(z) = α·[β + (1 − β)·f_rec(z)]` fitted to `1/z`.

use serde::{Deserialize, Serialize};

use crate::activation::slope::SlopeMap;
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct NormFit<T> {
    pub alpha: T,
    pub beta: T,
    /// Sum of squared deviations from `1/z` over the calibration grid.
    pub residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct NormModel<T> {
    pub alpha: T,
    pub beta: T,
    pub f_rec: SlopeMap<T>,
    #[serde(default = "T::zero")]
    pub residual: T,
}

impl<T: Scalar> NormModel<T> {
    pub fn new(f_rec: SlopeMap<T>, fit: NormFit<T>) -> Result<Self> {
        if !(fit.alpha > T::zero()) || !(fit.beta >= T::zero() && fit.beta <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "normalization requires alpha > 0 and beta in [0, 1], got alpha = {}, beta = {}",
                fit.alpha, fit.beta
            )));
        }
        Ok(Self {
            alpha: fit.alpha,
            beta: fit.beta,
            f_rec,
            residual: fit.residual,
        })
    }

    /// Fits `alpha`, `beta` against `1/z` on `grid_points` uniform points of
    /// the falling map's domain.
    pub fn calibrate(f_rec: SlopeMap<T>, grid_points: usize) -> Result<Self> {
        let (z_min, z_max) = f_rec.domain();
        let fit = fit_norm_factor(|z| f_rec.eval(z), z_min, z_max, grid_points)?;
        Self::new(f_rec, fit)
    }

    pub fn domain(&self) -> (T, T) {
        self.f_rec.domain()
    }

    #[inline]
    pub fn eval(&self, z: T) -> T {
        self.alpha * (self.beta + (T::one() - self.beta) * self.f_rec.eval(z))
    }

    #[inline]
    pub fn deriv(&self, z: T) -> T {
        self.alpha * (T::one() - self.beta) * self.f_rec.deriv(z)
    }
}

/// Least-squares `(alpha, beta)` minimizing `Σ (N(z) − 1/z)²` over a uniform
/// grid, with `beta` constrained to `[0, 1]`.
///
/// `N` is linear in `p = αβ` and `q = α(1 − β)`, so the unconstrained
/// problem is a 2×2 solve; the box constraint is `p ≥ 0, q ≥ 0`.
pub fn fit_norm_factor<T: Scalar>(
    f_rec: impl Fn(T) -> T,
    z_min: T,
    z_max: T,
    grid_points: usize,
) -> Result<NormFit<T>> {
    if !(z_min > T::zero()) || !(z_min < z_max) || !z_max.is_finite() {
        return Err(Error::DegenerateDomain {
            z_min: z_min.to_f64_lossy(),
            z_max: z_max.to_f64_lossy(),
        });
    }
    if grid_points < 2 {
        return Err(Error::InvalidParameter(format!(
            "normalization grid needs at least 2 points, got {grid_points}"
        )));
    }
    let last = T::from_usize_lossy(grid_points - 1);
    let grid: Vec<(T, T)> = (0..grid_points)
        .map(|i| {
            let z = z_min + (z_max - z_min) * T::from_usize_lossy(i) / last;
            (f_rec(z), T::one() / z)
        })
        .collect();

    let sse = |alpha: T, beta: T| -> T {
        grid.iter()
            .map(|&(f, y)| {
                let r = alpha * (beta + (T::one() - beta) * f) - y;
                r * r
            })
            .sum()
    };

    let (mut sff, mut sf, mut sfy, mut sy) = (T::zero(), T::zero(), T::zero(), T::zero());
    for &(f, y) in &grid {
        sff = sff + f * f;
        sf = sf + f;
        sfy = sfy + f * y;
        sy = sy + y;
    }
    let n = T::from_usize_lossy(grid.len());

    if let Some([p, q]) = linalg::solve([[n, sf], [sf, sff]], [sy, sfy]) {
        if p >= T::zero() && q >= T::zero() && p + q > T::zero() {
            let alpha = p + q;
            let beta = p / alpha;
            return Ok(NormFit {
                alpha,
                beta,
                residual: sse(alpha, beta),
            });
        }
    }

    // Constrained optimum lies on a face of the box.
    let mut candidates = Vec::with_capacity(2);
    if sff > T::zero() {
        candidates.push((sfy / sff, T::zero()));
    }
    candidates.push((sy / n, T::one()));
    let (alpha, beta) = candidates
        .into_iter()
        .filter(|(a, _)| *a > T::zero())
        .min_by(|x, y| sse(x.0, x.1).partial_cmp(&sse(y.0, y.1)).unwrap())
        .ok_or_else(|| Error::DegenerateData("no positive gain fits the normalization".into()))?;
    Ok(NormFit {
        alpha,
        beta,
        residual: sse(alpha, beta),
    })
}
