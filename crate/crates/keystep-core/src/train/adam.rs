//! Adam optimizer over the model's tensor list.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::model::ModelParams;

/// Adam moment decay rates and stabilizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state: one first and second moment per parameter tensor, in
/// the model's declaration order.
pub struct Adam {
    lr: f64,
    config: AdamConfig,
    step_count: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(lr: f64, config: AdamConfig, params: &ModelParams) -> Self {
        let shapes: Vec<Array2<f64>> = params
            .tensors()
            .iter()
            .map(|t| Array2::zeros(t.dim()))
            .collect();
        Adam {
            lr,
            config,
            step_count: 0,
            m: shapes.clone(),
            v: shapes,
        }
    }

    /// One update with bias-corrected moments:
    /// `θ ← θ − lr · m̂ / (√v̂ + ε)`. Gradients arrive in declaration
    /// order; a tensor the loss never reached passes a zero gradient.
    pub fn step(&mut self, params: &mut ModelParams, grads: &[Array2<f64>]) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let tensors = params.tensors_mut();
        assert_eq!(tensors.len(), grads.len(), "one gradient per tensor");
        for ((theta, g), (m, v)) in tensors
            .into_iter()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            assert_eq!(theta.dim(), g.dim(), "gradient shape mismatch");
            azip_update(theta, g, m, v, beta1, beta2, epsilon, self.lr, bc1, bc2);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn azip_update(
    theta: &mut Array2<f64>,
    g: &Array2<f64>,
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for (((th, &gi), mi), vi) in theta
        .iter_mut()
        .zip(g.iter())
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *mi = beta1 * *mi + (1.0 - beta1) * gi;
        *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
        let m_hat = *mi / bc1;
        let v_hat = *vi / bc2;
        *th -= lr * m_hat / (v_hat.sqrt() + epsilon);
    }
}
