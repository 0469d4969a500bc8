//! Super-resolution networks. Every family maps a bicubically pre-upsampled
//! single-channel field to a field of the same size, so all three share
//! [`Model`]: LR batch in, HR batch out.

mod checkpoint;
mod cnn;
mod fno;
mod probe;
mod spec;
mod vit;

pub use checkpoint::{Checkpoint, CKPT_MAGIC};
pub use probe::ModelProbe;
pub use spec::{ArchitectureSpec, Family};

use crate::error::{Error, Result};
use crate::grid::{bicubic_upsample, pairwise_sum, Real, Tensor};
use crate::layers::{Init, Parameter};
use crate::par::map_indexed;

enum Tape<T> {
    Cnn(cnn::Tape<T>),
    Fno(fno::Tape<T>),
    Vit(vit::Tape<T>),
}

impl<T> Tape<T> {
    fn signature(&self) -> u64 {
        match self {
            Tape::Cnn(t) => t.signature(),
            Tape::Fno(t) => t.signature(),
            Tape::Vit(t) => t.signature(),
        }
    }
}

/// One trainable network with its parameters in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T = f32> {
    spec: ArchitectureSpec,
    seed: u64,
    params: Vec<Parameter<T>>,
}

/// Per-sample result of a forward(+backward) pass.
struct SamplePass<T> {
    sse: f64,
    signature: u64,
    grads: Option<Vec<Tensor<T>>>,
}

impl<T: Real> Model<T> {
    /// Builds a freshly initialized network. Identical `(spec, seed)` pairs
    /// give bit-identical parameters.
    pub fn build(spec: &ArchitectureSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut init = Init::new(seed);
        let params = match spec.family {
            Family::Cnn => cnn::parameters(spec, &mut init),
            Family::Fno => fno::parameters(spec, &mut init),
            Family::CnnVit => vit::parameters(spec, &mut init),
        };
        Ok(Self {
            spec: spec.clone(),
            seed,
            params,
        })
    }

    /// Reassembles a model from stored tensors, checking names and shapes
    /// against a fresh build.
    pub fn from_parameters(spec: &ArchitectureSpec, seed: u64, tensors: Vec<(String, Tensor<T>)>) -> Result<Self> {
        let mut model = Self::build(spec, seed)?;
        if tensors.len() != model.params.len() {
            return Err(Error::Metadata(format!(
                "{} stored tensors for a model with {} parameters",
                tensors.len(),
                model.params.len()
            )));
        }
        for (p, (name, value)) in model.params.iter_mut().zip(tensors) {
            if p.name != name || p.value.shape() != value.shape() {
                return Err(Error::Metadata(format!(
                    "stored tensor {name} {:?} does not match parameter {} {:?}",
                    value.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
            p.value = value;
        }
        Ok(model)
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn parameters(&self) -> &[Parameter<T>] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [Parameter<T>] {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().map(Parameter::numel).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params.iter_mut().for_each(Parameter::zero_grad);
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            seed: self.seed,
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    grad: p.grad.cast(),
                })
                .collect(),
        }
    }

    /// Bicubic pre-upsampling of an LR batch (`N×1×h×w`, or a single
    /// `h×w` field) by the model's scale factor.
    pub fn upsample_input(&self, lr: &Tensor<T>) -> Result<Tensor<T>> {
        let [n, c, h, w] = lr.dims4()?;
        if c != 1 {
            return Err(Error::shape(format!("models take one input channel, got {c}")));
        }
        let lr = lr.clone().reshape(vec![n, 1, h, w])?;
        bicubic_upsample(&lr, self.spec.scale_factor)
    }

    /// LR batch → HR prediction `N×1×(h·s)×(w·s)`.
    pub fn forward(&self, lr: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward_hr(&self.upsample_input(lr)?)
    }

    /// Runs the network on an already upsampled batch.
    pub fn forward_hr(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let [n, _, h, w] = self.check_input(x)?;
        let outs = map_indexed(n, |b| -> Result<Tensor<T>> {
            let (y, _) = self.sample_forward(&x.batch_item(b)?)?;
            Ok(y)
        });
        let outs = outs.into_iter().collect::<Result<Vec<_>>>()?;
        Tensor::stack(&outs)?.reshape(vec![n, 1, h, w])
    }

    /// Mean squared error of `forward(lr)` against `hr` over every cell of
    /// the batch; gradients are stored in each parameter's `grad`
    /// (overwriting previous values).
    pub fn forward_backward(&mut self, lr: &Tensor<T>, hr: &Tensor<T>) -> Result<f64> {
        let x = self.upsample_input(lr)?;
        let passes = self.run(&x, hr, true)?;
        let loss = pairwise_sum(&passes.iter().map(|p| p.sse).collect::<Vec<_>>()) / hr.len() as f64;
        let mut acc: Option<Vec<Tensor<T>>> = None;
        for p in passes {
            let grads = p.grads.expect("gradients requested");
            match acc.as_mut() {
                None => acc = Some(grads),
                Some(a) => {
                    for (dst, g) in a.iter_mut().zip(&grads) {
                        dst.data_mut().iter_mut().zip(g.data()).for_each(|(d, &v)| *d = *d + v);
                    }
                }
            }
        }
        for (p, g) in self.params.iter_mut().zip(acc.expect("non-empty batch")) {
            p.grad = g;
        }
        Ok(loss)
    }

    /// Loss of `forward(lr)` against `hr` and a fingerprint of every ReLU
    /// branch taken, without gradients.
    pub fn loss_signature(&self, lr: &Tensor<T>, hr: &Tensor<T>) -> Result<(f64, u64)> {
        let x = self.upsample_input(lr)?;
        let passes = self.run(&x, hr, false)?;
        let loss = pairwise_sum(&passes.iter().map(|p| p.sse).collect::<Vec<_>>()) / hr.len() as f64;
        let sig = passes
            .iter()
            .fold(0u64, |acc, p| acc.rotate_left(7) ^ p.signature);
        Ok((loss, sig))
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<[usize; 4]> {
        let dims = x.dims4()?;
        if dims[1] != 1 {
            return Err(Error::shape(format!("models take one input channel, got {}", dims[1])));
        }
        self.spec.check_hr_size(dims[2], dims[3])?;
        Ok(dims)
    }

    fn run(&self, x: &Tensor<T>, hr: &Tensor<T>, grads: bool) -> Result<Vec<SamplePass<T>>> {
        let [n, _, h, w] = self.check_input(x)?;
        let [tn, tc, th, tw] = hr.dims4()?;
        if (tn, tc, th, tw) != (n, 1, h, w) {
            return Err(Error::shape(format!(
                "target {:?} does not match prediction {n}x1x{h}x{w}",
                hr.shape()
            )));
        }
        let scale = T::of(2.0 / hr.len() as f64);
        let passes = map_indexed(n, |b| -> Result<SamplePass<T>> {
            let (y, tape) = self.sample_forward(&x.batch_item(b)?)?;
            let t = &hr.data()[b * h * w..(b + 1) * h * w];
            let diff: Vec<f64> = y.data().iter().zip(t).map(|(&p, &q)| (p - q).f64()).collect();
            let sse = pairwise_sum(&diff.iter().map(|d| d * d).collect::<Vec<_>>());
            let signature = tape.signature();
            let grads = if grads {
                let dy = Tensor::new(
                    y.shape().to_vec(),
                    y.data().iter().zip(t).map(|(&p, &q)| (p - q) * scale).collect(),
                )?;
                Some(self.sample_backward(&tape, &dy)?)
            } else {
                None
            };
            Ok(SamplePass { sse, signature, grads })
        });
        passes.into_iter().collect()
    }

    fn sample_forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Tape<T>)> {
        let s = &self.spec;
        let p = &self.params;
        Ok(match s.family {
            Family::Cnn => {
                let (y, t) = cnn::forward(s, p, x)?;
                (y, Tape::Cnn(t))
            }
            Family::Fno => {
                let (y, t) = fno::forward(s, p, x)?;
                (y, Tape::Fno(t))
            }
            Family::CnnVit => {
                let (y, t) = vit::forward(s, p, x)?;
                (y, Tape::Vit(t))
            }
        })
    }

    fn sample_backward(&self, tape: &Tape<T>, dy: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        match tape {
            Tape::Cnn(t) => cnn::backward(&self.spec, t, dy),
            Tape::Fno(t) => fno::backward(&self.spec, t, dy),
            Tape::Vit(t) => vit::backward(&self.spec, t, dy),
        }
    }
}
