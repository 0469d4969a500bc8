//! Central finite-difference verification of analytic gradients.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    conv2d_backward, conv2d_forward, layer_norm_backward, layer_norm_forward, linear_backward,
    linear_forward, mhsa_backward, mhsa_forward, relu_backward, relu_forward,
    spectral_conv_backward, spectral_conv_forward, spectral_weight_shape, Init, MhsaWeights,
};
use crate::error::{Error, Result};
use crate::grid::Tensor;

/// A scalar function of a flat coordinate vector with an analytic gradient.
pub trait Probe {
    fn len(&self) -> usize;
    fn get(&self, i: usize) -> f64;
    fn set(&mut self, i: usize, v: f64);
    /// Loss value plus a fingerprint of every piecewise-linear branch taken
    /// (ReLU masks). Finite differences across a branch change are invalid.
    fn loss(&self) -> Result<(f64, u64)>;
    fn gradient(&self) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Coordinates are subsampled (seeded) above this count.
    pub max_coords: usize,
    pub seed: u64,
    /// Scales the analytic gradient by 1.05. Only for exercising the checker.
    pub corrupt: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            max_coords: 256,
            seed: 0,
            corrupt: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_coord: usize,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub total_coords: usize,
}

/// Relative errors below this gradient magnitude are measured against it.
const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn grad_check(probe: &mut dyn Probe, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut analytic = probe.gradient()?;
    if cfg.corrupt {
        analytic.iter_mut().for_each(|g| *g *= 1.05);
    }
    let total = probe.len();
    if analytic.len() != total {
        return Err(Error::shape(format!(
            "probe returned {} gradient entries for {total} coordinates",
            analytic.len()
        )));
    }
    let mut order: Vec<usize> = (0..total).collect();
    if total > cfg.max_coords {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    }
    let (_, base_sig) = probe.loss()?;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_coord: 0,
        checked: 0,
        skipped_kinks: 0,
        total_coords: total,
    };
    for &i in &order {
        if report.checked >= cfg.max_coords {
            break;
        }
        let x0 = probe.get(i);
        probe.set(i, x0 + cfg.eps);
        let (lp, sp) = probe.loss()?;
        probe.set(i, x0 - cfg.eps);
        let (lm, sm) = probe.loss()?;
        probe.set(i, x0);
        if sp != base_sig || sm != base_sig {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * cfg.eps);
        let err = relative_error(analytic[i], numeric);
        if err > report.max_rel_error || report.checked == 0 {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst_coord = i;
        }
        report.checked += 1;
    }
    Ok(report)
}

pub fn mask_signature<'a>(masks: impl IntoIterator<Item = &'a [bool]>) -> u64 {
    let mut h = DefaultHasher::new();
    for m in masks {
        m.hash(&mut h);
    }
    h.finish()
}

type EvalFn = Box<dyn Fn(&[Tensor<f64>]) -> Result<(Tensor<f64>, u64)>>;
type GradFn = Box<dyn Fn(&[Tensor<f64>], &Tensor<f64>) -> Result<Vec<Tensor<f64>>>>;

/// Probe over a list of tensors (input first, then parameters) with loss
/// `Σ r ⊙ f(tensors)` for a fixed random projection `r`.
pub struct TensorProbe {
    tensors: Vec<Tensor<f64>>,
    seed: u64,
    eval: EvalFn,
    grad: GradFn,
}

impl TensorProbe {
    pub fn new(tensors: Vec<Tensor<f64>>, seed: u64, eval: EvalFn, grad: GradFn) -> Self {
        Self {
            tensors,
            seed,
            eval,
            grad,
        }
    }

    fn locate(&self, mut i: usize) -> (usize, usize) {
        for (t, tensor) in self.tensors.iter().enumerate() {
            if i < tensor.len() {
                return (t, i);
            }
            i -= tensor.len();
        }
        panic!("coordinate out of range");
    }

    fn projection(&self, shape: &[usize]) -> Tensor<f64> {
        Init::new(self.seed ^ 0x5eed).uniform(shape, -1.0, 1.0)
    }
}

impl Probe for TensorProbe {
    fn len(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    fn get(&self, i: usize) -> f64 {
        let (t, j) = self.locate(i);
        self.tensors[t].data()[j]
    }

    fn set(&mut self, i: usize, v: f64) {
        let (t, j) = self.locate(i);
        self.tensors[t].data_mut()[j] = v;
    }

    fn loss(&self) -> Result<(f64, u64)> {
        let (y, sig) = (self.eval)(&self.tensors)?;
        let r = self.projection(y.shape());
        Ok((y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum(), sig))
    }

    fn gradient(&self) -> Result<Vec<f64>> {
        let (y, _) = (self.eval)(&self.tensors)?;
        let r = self.projection(y.shape());
        let grads = (self.grad)(&self.tensors, &r)?;
        Ok(grads.into_iter().flat_map(|g| g.into_data()).collect())
    }
}

/// Layers with a built-in finite-difference check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    Identity,
    Conv2d,
    Relu,
    Linear,
    LayerNorm,
    Mhsa,
    SpectralConv,
}

impl LayerKind {
    pub const ALL: [LayerKind; 6] = [
        LayerKind::Conv2d,
        LayerKind::Relu,
        LayerKind::Linear,
        LayerKind::LayerNorm,
        LayerKind::Mhsa,
        LayerKind::SpectralConv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Identity => "identity",
            LayerKind::Conv2d => "conv2d",
            LayerKind::Relu => "relu",
            LayerKind::Linear => "linear",
            LayerKind::LayerNorm => "layer-norm",
            LayerKind::Mhsa => "mhsa",
            LayerKind::SpectralConv => "spectral-conv",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        std::iter::once(LayerKind::Identity)
            .chain(LayerKind::ALL)
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown layer {s:?}")))
    }
}

/// Builds the standard probe for `kind` with seeded random inputs/weights:
/// conv2d 1×1×8×8 → 4 filters, relu on 1×2×8×8, linear 5×6 → 4,
/// layer-norm 4×8, mhsa 6 tokens × 16 dims × 2 heads, spectral conv
/// 1×2×16×16 with 4 modes.
pub fn layer_probe(kind: LayerKind, seed: u64) -> TensorProbe {
    let mut init = Init::new(seed);
    match kind {
        LayerKind::Identity => TensorProbe::new(
            vec![init.uniform(&[3, 4], -1.0, 1.0)],
            seed,
            Box::new(|t| Ok((t[0].clone(), 0))),
            Box::new(|_, r| Ok(vec![r.clone()])),
        ),
        LayerKind::Conv2d => TensorProbe::new(
            vec![
                init.uniform(&[1, 1, 8, 8], -1.0, 1.0),
                init.fan_in(&[4, 1, 3, 3], 9),
                init.fan_in(&[4], 9),
            ],
            seed,
            Box::new(|t| Ok((conv2d_forward(&t[0], &t[1], &t[2])?.0, 0))),
            Box::new(|t, r| {
                let (_, ctx) = conv2d_forward(&t[0], &t[1], &t[2])?;
                let (dx, dw, db) = conv2d_backward(&ctx, r)?;
                Ok(vec![dx, dw, db])
            }),
        ),
        LayerKind::Relu => TensorProbe::new(
            vec![init.uniform(&[1, 2, 8, 8], -1.0, 1.0)],
            seed,
            Box::new(|t| {
                let (y, ctx) = relu_forward(&t[0]);
                Ok((y, mask_signature([ctx.mask()])))
            }),
            Box::new(|t, r| {
                let (_, ctx) = relu_forward(&t[0]);
                Ok(vec![relu_backward(&ctx, r)?])
            }),
        ),
        LayerKind::Linear => TensorProbe::new(
            vec![
                init.uniform(&[5, 6], -1.0, 1.0),
                init.fan_in(&[6, 4], 6),
                init.fan_in(&[4], 6),
            ],
            seed,
            Box::new(|t| Ok((linear_forward(&t[0], &t[1], &t[2])?.0, 0))),
            Box::new(|t, r| {
                let (_, ctx) = linear_forward(&t[0], &t[1], &t[2])?;
                let (dx, dw, db) = linear_backward(&ctx, r)?;
                Ok(vec![dx, dw, db])
            }),
        ),
        LayerKind::LayerNorm => TensorProbe::new(
            vec![
                init.uniform(&[4, 8], -2.0, 2.0),
                init.uniform(&[8], 0.5, 1.5),
                init.uniform(&[8], -0.5, 0.5),
            ],
            seed,
            Box::new(|t| Ok((layer_norm_forward(&t[0], &t[1], &t[2])?.0, 0))),
            Box::new(|t, r| {
                let (_, ctx) = layer_norm_forward(&t[0], &t[1], &t[2])?;
                let (dx, dg, db) = layer_norm_backward(&ctx, r)?;
                Ok(vec![dx, dg, db])
            }),
        ),
        LayerKind::Mhsa => {
            let view = |t: &[Tensor<f64>]| -> (Tensor<f64>, [Tensor<f64>; 4]) {
                (t[0].clone(), [t[1].clone(), t[2].clone(), t[3].clone(), t[4].clone()])
            };
            TensorProbe::new(
                vec![
                    init.uniform(&[6, 16], -1.0, 1.0),
                    init.fan_in(&[16, 48], 16),
                    init.fan_in(&[48], 16),
                    init.fan_in(&[16, 16], 16),
                    init.fan_in(&[16], 16),
                ],
                seed,
                Box::new(move |t| {
                    let (x, [a, b, c, d]) = view(t);
                    let w = MhsaWeights { wqkv: &a, bqkv: &b, wo: &c, bo: &d };
                    Ok((mhsa_forward(&x, w, 2)?.0, 0))
                }),
                Box::new(move |t, r| {
                    let (x, [a, b, c, d]) = view(t);
                    let w = MhsaWeights { wqkv: &a, bqkv: &b, wo: &c, bo: &d };
                    let (_, ctx) = mhsa_forward(&x, w, 2)?;
                    let g = mhsa_backward(&ctx, r)?;
                    Ok(vec![g.dx, g.dwqkv, g.dbqkv, g.dwo, g.dbo])
                }),
            )
        }
        LayerKind::SpectralConv => TensorProbe::new(
            vec![
                init.uniform(&[1, 2, 16, 16], -1.0, 1.0),
                init.uniform(&spectral_weight_shape(4, 2, 2), -0.5, 0.5),
            ],
            seed,
            Box::new(|t| Ok((spectral_conv_forward(&t[0], &t[1])?.0, 0))),
            Box::new(|t, r| {
                let (_, ctx) = spectral_conv_forward(&t[0], &t[1])?;
                let (dx, dw) = spectral_conv_backward(&ctx, r)?;
                Ok(vec![dx, dw])
            }),
        ),
    }
}
