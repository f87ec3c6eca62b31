use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::network::{Gradients, NetworkState};
use crate::error::{Error, Result};

/// Adam hyperparameters. Defaults are lr 1e-5, betas (0.9, 0.999),
/// eps 1e-8 and batches of 512.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 512,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidOptim(msg.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        Ok(())
    }
}

/// `base^exp` by binary exponentiation, so bias correction does not depend on
/// the platform `pow`.
fn pow_u64(base: f64, mut exp: u64) -> f64 {
    let mut acc = 1.0;
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= b;
        }
        b *= b;
        exp >>= 1;
    }
    acc
}

struct Step {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
}

impl Step {
    #[inline]
    fn apply(&self, theta: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64]) {
        for (((t, m), v), &g) in theta.iter_mut().zip(m).zip(v).zip(g) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / self.bc1;
            let v_hat = *v / self.bc2;
            *t -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

fn same_shape(a: &Matrix, b: &Matrix) -> bool {
    a.rows() == b.rows() && a.cols() == b.cols()
}

/// One bias-corrected Adam update of every parameter, in place.
pub fn adam_step(state: &mut NetworkState, grads: &Gradients, cfg: &OptimConfig) -> Result<()> {
    if grads.layers.len() != state.layers.len()
        || state
            .layers
            .iter()
            .zip(&grads.layers)
            .any(|(l, g)| !same_shape(&l.weights, &g.weights) || l.bias.len() != g.bias.len())
    {
        return Err(Error::DimensionMismatch("gradients do not match network".into()));
    }
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    state.t_adam += 1;
    let step = Step {
        lr: cfg.learning_rate,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        eps: cfg.epsilon,
        bc1: 1.0 - pow_u64(cfg.beta1, state.t_adam),
        bc2: 1.0 - pow_u64(cfg.beta2, state.t_adam),
    };
    for (layer, g) in state.layers.iter_mut().zip(&grads.layers) {
        step.apply(
            layer.weights.as_mut_slice(),
            layer.m_weights.as_mut_slice(),
            layer.v_weights.as_mut_slice(),
            g.weights.as_slice(),
        );
        step.apply(&mut layer.bias, &mut layer.m_bias, &mut layer.v_bias, &g.bias);
    }
    if !state.all_finite() {
        return Err(Error::NonFinite(format!("parameters after Adam step {}", state.t_adam)));
    }
    Ok(())
}
