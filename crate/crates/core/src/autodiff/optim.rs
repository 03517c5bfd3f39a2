use alloc::vec;
use alloc::vec::Vec;

use super::Matrix;
use crate::error::{Error, Result};

/// Adam hyper-parameters. Weight decay is decoupled: parameters shrink by
/// `lr * weight_decay` before the moment update is applied.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamConfig { lr, weight_decay, ..Default::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

pub struct Adam {
    pub config: AdamConfig,
    steps: u32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Matrix]) -> Self {
        let zeros = || params.iter().map(|p| vec![0.0; p.len()]).collect::<Vec<_>>();
        Adam { config, steps: 0, m: zeros(), v: zeros() }
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [Matrix], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::ShapeMismatch {
                op: "adam",
                left: (params.len(), grads.len()),
                right: (self.m.len(), 1),
            });
        }
        let c = self.config;
        self.steps += 1;
        let bc1 = 1.0 - libm::pow(c.beta1, self.steps as f64);
        let bc2 = 1.0 - libm::pow(c.beta2, self.steps as f64);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            if g.len() != p.len() || m.len() != p.len() {
                return Err(Error::ShapeMismatch { op: "adam", left: p.shape(), right: (g.len(), 1) });
            }
            for k in 0..p.data.len() {
                let gk = g[k];
                m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
                v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                let w = &mut p.data[k];
                *w -= c.lr * c.weight_decay * *w;
                *w -= c.lr * mhat / (libm::sqrt(vhat) + c.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = [Matrix::from_vec(1, 2, vec![1.0, -1.0]).unwrap()];
        let mut opt = Adam::new(AdamConfig::new(0.1, 0.0), &p);
        opt.step(&mut p, &[vec![3.0, -0.5]]).unwrap();
        assert!((p[0].data[0] - 0.9).abs() < 1e-6);
        assert!((p[0].data[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut p = [Matrix::from_vec(1, 1, vec![5.0]).unwrap()];
        let mut opt = Adam::new(AdamConfig::new(0.1, 0.0), &p);
        for _ in 0..500 {
            let g = vec![2.0 * (p[0].data[0] - 2.0)];
            opt.step(&mut p, &[g]).unwrap();
        }
        assert!((p[0].data[0] - 2.0).abs() < 1e-2);
    }

    #[test]
    fn decay_shrinks_without_gradient() {
        let mut p = [Matrix::from_vec(1, 1, vec![1.0]).unwrap()];
        let mut opt = Adam::new(AdamConfig::new(0.1, 0.5), &p);
        opt.step(&mut p, &[vec![0.0]]).unwrap();
        assert!((p[0].data[0] - 0.95).abs() < 1e-12);
    }
}
