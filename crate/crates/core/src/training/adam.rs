use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::unfolded::MlpParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.lr.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// First and second moment estimates over the flattened parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        AdamState {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` along `-grad`.
pub fn adam_step(
    params: &mut MlpParams,
    grad: &MlpParams,
    state: &mut AdamState,
    hyper: &AdamConfig,
) -> Result<()> {
    if grad.layer_sizes != params.layer_sizes
        || state.m.len() != params.num_params()
        || state.v.len() != state.m.len()
    {
        return Err(Error::invalid(
            "optimizer state does not match the parameters",
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - hyper.beta1.powi(t);
    let c2 = 1.0 - hyper.beta2.powi(t);
    let mut idx = 0;
    let layers = params.weights.len();
    for l in 0..layers {
        for (x, g) in params.weights[l]
            .iter_mut()
            .chain(params.biases[l].iter_mut())
            .zip(grad.weights[l].iter().chain(&grad.biases[l]))
        {
            let m = &mut state.m[idx];
            let v = &mut state.v[idx];
            *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
            *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
            *x -= hyper.lr * (*m / c1) / ((*v / c2).sqrt() + hyper.eps);
            idx += 1;
        }
    }
    Ok(())
}
