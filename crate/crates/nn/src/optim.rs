use eoattn_core::Scalar;
use serde::{Deserialize, Serialize};

/// Adam with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamW<T> {
    cfg: AdamWConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: i32,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(cfg: AdamWConfig, shapes: &[Vec<T>]) -> Self {
        Self {
            cfg,
            m: shapes.iter().map(|p| vec![T::zero(); p.len()]).collect(),
            v: shapes.iter().map(|p| vec![T::zero(); p.len()]).collect(),
            t: 0,
        }
    }

    /// One update; `decay[i]` selects which parameters are weight-decayed.
    pub fn step(&mut self, params: &mut [Vec<T>], grads: &[Vec<T>], decay: &[bool], lr: f64) {
        self.t += 1;
        let (b1, b2) = (self.cfg.beta1, self.cfg.beta2);
        let c1 = T::lit(1.0 - b1.powi(self.t));
        let c2 = T::lit(1.0 - b2.powi(self.t));
        let (b1, b2) = (T::lit(b1), T::lit(b2));
        let (lr_t, eps) = (T::lit(lr), T::lit(self.cfg.eps));
        let wd = T::lit(lr * self.cfg.weight_decay);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.len() {
                m[j] = b1 * m[j] + (T::one() - b1) * g[j];
                v[j] = b2 * v[j] + (T::one() - b2) * g[j] * g[j];
                let update = (m[j] / c1) / ((v[j] / c2).sqrt() + eps);
                if decay[i] {
                    p[j] = p[j] - wd * p[j];
                }
                p[j] = p[j] - lr_t * update;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let mut p = vec![vec![3.0f64, -2.0]];
        let mut opt = AdamW::new(
            AdamWConfig {
                weight_decay: 0.0,
                ..Default::default()
            },
            &p,
        );
        for _ in 0..2000 {
            let g = vec![p[0].iter().map(|x| 2.0 * x).collect::<Vec<_>>()];
            opt.step(&mut p, &g, &[true], 0.01);
        }
        assert!(p[0].iter().all(|x| x.abs() < 1e-2), "{p:?}");
    }

    #[test]
    fn zero_rate_is_a_no_op() {
        let mut p = vec![vec![1.5f32, -0.5]];
        let before = p.clone();
        let mut opt = AdamW::new(AdamWConfig::default(), &p);
        opt.step(&mut p, &[vec![0.3, 0.7]], &[true], 0.0);
        assert_eq!(p, before);
    }
}
