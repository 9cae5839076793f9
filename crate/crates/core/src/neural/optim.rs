//! Adaptive-moment optimizer with decoupled weight decay.

use super::{Mlp, MlpGrads};
use crate::{Error, Mat, Result, Vecf};

/// AdamW-style optimizer state for one network.
///
/// Decay is decoupled: parameters are first shrunk by `lr · weight_decay`
/// multiplicatively, then moved by the bias-corrected adaptive step. Defaults
/// follow the usual `(0.9, 0.999, 1e-8)` moments with `lr = wd = 1e-4`.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    m_weights: Vec<Mat>,
    v_weights: Vec<Mat>,
    m_bias: Vec<Vecf>,
    v_bias: Vec<Vecf>,
}

impl AdamW {
    pub fn new(mlp: &Mlp, learning_rate: f64, weight_decay: f64) -> Self {
        AdamW {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            m_weights: mlp.layers().iter().map(|l| Mat::zeros(l.weights.nrows(), l.weights.ncols())).collect(),
            v_weights: mlp.layers().iter().map(|l| Mat::zeros(l.weights.nrows(), l.weights.ncols())).collect(),
            m_bias: mlp.layers().iter().map(|l| Vecf::zeros(l.bias.len())).collect(),
            v_bias: mlp.layers().iter().map(|l| Vecf::zeros(l.bias.len())).collect(),
        }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Apply one update. Rejects non-finite gradients, naming the offending
    /// parameter block.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &MlpGrads) -> Result<()> {
        for (j, g) in grads.d_weights.iter().enumerate() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Training(format!("non-finite gradient in layer {j} weights")));
            }
        }
        for (j, g) in grads.d_bias.iter().enumerate() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Training(format!("non-finite gradient in layer {j} bias")));
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let corr1 = 1.0 - self.beta1.powi(t);
        let corr2 = 1.0 - self.beta2.powi(t);
        let decay = 1.0 - self.learning_rate * self.weight_decay;
        let (lr, b1, b2, eps) = (self.learning_rate, self.beta1, self.beta2, self.epsilon);

        for (j, layer) in mlp.layers_mut().iter_mut().enumerate() {
            update_block(
                layer.weights.as_mut_slice(),
                grads.d_weights[j].as_slice(),
                self.m_weights[j].as_mut_slice(),
                self.v_weights[j].as_mut_slice(),
                decay,
                lr,
                b1,
                b2,
                eps,
                corr1,
                corr2,
            );
            update_block(
                layer.bias.as_mut_slice(),
                grads.d_bias[j].as_slice(),
                self.m_bias[j].as_mut_slice(),
                self.v_bias[j].as_mut_slice(),
                decay,
                lr,
                b1,
                b2,
                eps,
                corr1,
                corr2,
            );
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn update_block(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    decay: f64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    corr1: f64,
    corr2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / corr1;
        let v_hat = v[i] / corr2;
        params[i] = params[i] * decay - lr * m_hat / (v_hat.sqrt() + epsilon);
    }
}
