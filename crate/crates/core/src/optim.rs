//! Adaptive-moment gradient descent.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
}

impl Adam {
    pub fn new(dim: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        let lr = self.config.lr;
        self.step_with_lr(params, grad, lr)
    }

    /// One update with an explicit learning rate (for schedules).
    pub fn step_with_lr(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::LengthMismatch {
                what: "optimizer state",
                expected: self.m.len(),
                actual: if params.len() != self.m.len() { params.len() } else { grad.len() },
            });
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient entry {i} is {}", grad[i])));
        }
        self.steps += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let bc1 = 1.0 - beta1.powi(self.steps as i32);
        let bc2 = 1.0 - beta2.powi(self.steps as i32);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut opt = Adam::new(3, AdamConfig::default());
        let mut p = vec![1.0, -2.0, 3.0];
        opt.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn constant_gradient_moves_by_lr() {
        let cfg = AdamConfig::default();
        let mut opt = Adam::new(1, cfg);
        let mut p = vec![0.0];
        let mut last = 0.0;
        for _ in 0..2000 {
            last = p[0];
            opt.step(&mut p, &[0.37]).unwrap();
        }
        let disp = (p[0] - last).abs();
        assert!((disp - cfg.lr).abs() < 1e-6 * cfg.lr.max(1.0), "{disp}");
    }

    #[test]
    fn minimises_quadratic() {
        let mut opt = Adam::new(1, AdamConfig { lr: 0.1, ..Default::default() });
        let mut u = vec![5.0];
        for _ in 0..500 {
            let g = [2.0 * u[0]];
            opt.step(&mut u, &g).unwrap();
        }
        assert!(u[0].abs() < 0.5, "{}", u[0]);
    }

    #[test]
    fn rejects_bad_input() {
        let mut opt = Adam::new(2, AdamConfig::default());
        let mut p = vec![0.0, 0.0];
        assert!(opt.step(&mut p, &[f64::NAN, 0.0]).is_err());
        assert!(opt.step(&mut p, &[0.0]).is_err());
        assert_eq!(opt.steps(), 0);
    }
}
