use serde::{Deserialize, Serialize};

use crate::grid::{Real, Tensor};
use crate::layers::Parameter;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one tensor per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T = f32> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &[Parameter<T>]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update from the gradients stored in `params`.
/// Moment arithmetic is carried out in f64.
pub fn adam_step<T: Real>(params: &mut [Parameter<T>], state: &mut AdamState<T>, cfg: &AdamConfig) {
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for ((p, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        let g = p.grad.data();
        for (((theta, m), v), &g) in p
            .value
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g)
        {
            let g = g.f64();
            let mn = b1 * m.f64() + (1.0 - b1) * g;
            let vn = b2 * v.f64() + (1.0 - b2) * g * g;
            *m = T::of(mn);
            *v = T::of(vn);
            let step = cfg.learning_rate * (mn / c1) / ((vn / c2).sqrt() + cfg.eps);
            *theta = T::of(theta.f64() - step);
        }
    }
}
