use super::params::{Gradients, Parameters};
use crate::error::Result;

pub const DEFAULT_LEARNING_RATE: f32 = 1e-3;

/// Bias-corrected Adam moments for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Parameters,
    pub v: Parameters,
    pub t: u64,
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl AdamState {
    pub fn new(params: &Parameters, learning_rate: f32) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut Parameters, grads: &Gradients) -> Result<()> {
        params.check_aligned(grads)?;
        params.check_aligned(&self.m)?;
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (self.beta1 as f64, self.beta2 as f64);
        let correction1 = 1.0 - b1.powi(t);
        let correction2 = 1.0 - b2.powi(t);
        let lr = self.learning_rate as f64;
        let eps = self.epsilon as f64;

        for idx in 0..params.len() {
            let g = grads.tensor(idx).data();
            let m = self.m.tensor_mut(idx).data_mut();
            let v = self.v.tensor_mut(idx).data_mut();
            let theta = params.tensor_mut(idx).data_mut();
            for i in 0..theta.len() {
                let gi = g[i] as f64;
                let mi = b1 * m[i] as f64 + (1.0 - b1) * gi;
                let vi = b2 * v[i] as f64 + (1.0 - b2) * gi * gi;
                m[i] = mi as f32;
                v[i] = vi as f32;
                let m_hat = mi / correction1;
                let v_hat = vi / correction2;
                theta[i] = (theta[i] as f64 - lr * m_hat / (v_hat.sqrt() + eps)) as f32;
            }
        }
        Ok(())
    }
}
