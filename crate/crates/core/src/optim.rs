//! Adam optimizer over a list of parameter tensors.

use odernn_autodiff::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        let zeros = |t: &Tensor| vec![0.0; t.len()];
        Self {
            config,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
            t: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.config.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update. Non-finite gradients are rejected before
    /// anything is modified.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::InvalidInput(format!(
                "optimizer tracks {} tensors, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != self.m[i].len() {
                return Err(Error::InvalidInput(format!(
                    "gradient {i} has the wrong size"
                )));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient of parameter tensor {i}"
                )));
            }
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for (((w, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_along_sign() {
        let mut p = vec![Tensor::vector(vec![1.0, -1.0, 0.0]).unwrap()];
        let g = vec![Tensor::vector(vec![3.0, -0.5, 0.0]).unwrap()];
        let mut opt = Adam::new(
            AdamConfig {
                lr: 0.1,
                ..Default::default()
            },
            &p,
        );
        opt.step(&mut p, &g).unwrap();
        let d = p[0].data();
        assert!((d[0] - 0.9).abs() < 1e-6);
        assert!((d[1] + 0.9).abs() < 1e-6);
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn non_finite_gradient_leaves_parameters_untouched() {
        let mut p = vec![Tensor::vector(vec![1.0]).unwrap()];
        let mut g = vec![Tensor::vector(vec![1.0]).unwrap()];
        g[0].data_mut()[0] = f64::NAN;
        let mut opt = Adam::new(AdamConfig::default(), &p);
        assert!(matches!(opt.step(&mut p, &g), Err(Error::NonFinite(_))));
        assert_eq!(p[0].data(), &[1.0]);
        assert_eq!(opt.steps(), 0);
    }
}
