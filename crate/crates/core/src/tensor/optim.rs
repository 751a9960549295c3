use serde::{Deserialize, Serialize};

use super::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay, applied as `lr * weight_decay * value`.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

impl AdamConfig {
    /// Pre-training constants: `(beta1, beta2) = (0.0, 0.95)`, weight decay 0.05.
    pub fn pretraining() -> Self {
        Self { beta1: 0.0, beta2: 0.95, eps: 1e-8, weight_decay: 0.05 }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config }
    }

    /// One bias-corrected Adam update on every parameter, then clears grads.
    pub fn step(&self, store: &mut ParamStore, lr: f64) {
        let AdamConfig { beta1, beta2, eps, weight_decay } = self.config;
        for p in store.iter_mut() {
            p.step += 1;
            let t = p.step as i32;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            let values = p.value.data_mut();
            for k in 0..values.len() {
                let g = p.grad[k];
                p.first_moment[k] = beta1 * p.first_moment[k] + (1.0 - beta1) * g;
                p.second_moment[k] = beta2 * p.second_moment[k] + (1.0 - beta2) * g * g;
                let m_hat = p.first_moment[k] / c1;
                let v_hat = p.second_moment[k] / c2;
                values[k] -= lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * values[k]);
                p.grad[k] = 0.0;
            }
        }
    }
}

/// Free-function form of [`Adam::step`].
pub fn adam_step(store: &mut ParamStore, lr: f64, beta1: f64, beta2: f64, eps: f64) {
    Adam::new(AdamConfig { beta1, beta2, eps, weight_decay: 0.0 }).step(store, lr);
}
