//! Adaptive moment estimation.

use serde::{Deserialize, Serialize};

use super::mlp::Linear;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    #[serde(default = "AdamConfig::default_beta1")]
    pub beta1: f64,
    #[serde(default = "AdamConfig::default_beta2")]
    pub beta2: f64,
    #[serde(default = "AdamConfig::default_eps")]
    pub eps: f64,
}

impl AdamConfig {
    fn default_beta1() -> f64 {
        0.9
    }
    fn default_beta2() -> f64 {
        0.999
    }
    fn default_eps() -> f64 {
        1e-8
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Optimizer state: first and second moment estimates per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Linear>,
    pub v: Vec<Linear>,
}

impl Adam {
    pub fn new(config: AdamConfig, layers: &[Linear]) -> Self {
        let zeros = || layers.iter().map(|l| Linear::zeros(l.weight.nrows(), l.weight.ncols())).collect();
        Self { config, step: 0, m: zeros(), v: zeros() }
    }

    /// Applies one bias-corrected update with learning rate `lr`.
    pub fn update(&mut self, params: &mut [Linear], grads: &[Linear], lr: f64) {
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - beta2.powi(self.step.min(i32::MAX as u64) as i32);
        let step_size = lr / c1;
        let apply = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= step_size * *m / ((*v / c2).sqrt() + eps);
        };
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(&mut p.weight)
                .and(&g.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .for_each(|p, &g, m, v| apply(p, g, m, v));
            ndarray::Zip::from(&mut p.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| apply(p, g, m, v));
        }
    }
}
