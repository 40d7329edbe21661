use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam with decoupled weight decay:
/// `p ← p − lr · (m̂ / (√v̂ + ε) + weight_decay · p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub learning_rate: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamW {
    pub fn new(n_params: usize, learning_rate: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate,
            weight_decay,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn from_state(learning_rate: f64, weight_decay: f64, step: u64, m: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if m.len() != v.len() {
            return Err(Error::Checkpoint("Adam moment vectors differ in length".into()));
        }
        Ok(Self {
            learning_rate,
            weight_decay,
            step,
            m,
            v,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient length mismatch");
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - BETA1.powi(t);
        let bias2 = 1.0 - BETA2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= self.learning_rate
                * (m_hat / (v_hat.sqrt() + EPSILON) + self.weight_decay * params[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut opt = AdamW::new(3, 1e-3, 0.0);
        let mut p = vec![0.5, -0.2, 1.0];
        opt.update(&mut p, &[0.3, -4.0, 1e-3]);
        let moved: Vec<f64> = [0.5 - p[0], -0.2 - p[1], 1.0 - p[2]].to_vec();
        assert!((moved[0] - 1e-3).abs() < 1e-9);
        assert!((moved[1] + 1e-3).abs() < 1e-9);
        assert!((moved[2] - 1e-3).abs() < 1e-7);
    }

    #[test]
    fn zero_gradient_only_decays() {
        let mut opt = AdamW::new(2, 1e-2, 1e-3);
        let mut p = vec![2.0, -1.0];
        opt.update(&mut p, &[0.0, 0.0]);
        assert_eq!(p, vec![2.0 - 1e-2 * 1e-3 * 2.0, -1.0 + 1e-2 * 1e-3]);
    }
}
